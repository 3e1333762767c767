#include "prefail/features.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace prefail {

const std::vector<double> kEdgeKernel = {-1.0, 1.0};
const std::vector<double> kEdgeKernelWide = {-1.0, 0.0, 1.0};
const std::vector<double> kSmoothKernel = {0.25, 0.5, 0.25};
// Integer taps normalized so the blur is mean-preserving.
const std::vector<double> kBlurKernel = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

const char* feature_name(FeatureId id) {
    switch (id) {
        case FeatureId::Original: return "original";
        case FeatureId::EdgeChange: return "edge";
        case FeatureId::Smoothed: return "smoothed";
        case FeatureId::Blurred: return "blurred";
        case FeatureId::CumulativeSum: return "cumsum";
        case FeatureId::ReversalCount: return "reversal";
        case FeatureId::CusumF1Pos: return "cusum-f1-pos";
        case FeatureId::CusumF1Neg: return "cusum-f1-neg";
        case FeatureId::CusumF2Pos: return "cusum-f2-pos";
        case FeatureId::CusumF2Neg: return "cusum-f2-neg";
    }
    return "?";
}

std::optional<FeatureId> feature_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kFeatureIdCount; ++i) {
        const auto id = static_cast<FeatureId>(i);
        if (name == feature_name(id)) return id;
    }
    return std::nullopt;
}

Matrix conv_time(const Matrix& m, const std::vector<double>& kernel, Padding padding) {
    const std::size_t T = m.rows();
    const std::size_t F = m.cols();
    const std::size_t K = kernel.size();
    if (K < 2) throw std::invalid_argument("conv_time: kernel must have at least 2 taps");
    if (K > T) throw std::invalid_argument("conv_time: kernel longer than the series");

    // Offset of the first tap relative to the output sample.
    const std::ptrdiff_t shift =
        padding == Padding::Causal ? -(static_cast<std::ptrdiff_t>(K) - 1)
                                   : -static_cast<std::ptrdiff_t>((K - 1) / 2);

    Matrix out(T, F);
    for (std::size_t f = 0; f < F; ++f) {
        for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < K; ++j) {
                std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) + shift + static_cast<std::ptrdiff_t>(j);
                if (idx < 0) idx = 0;
                if (idx >= static_cast<std::ptrdiff_t>(T)) idx = static_cast<std::ptrdiff_t>(T) - 1;
                acc += kernel[j] * m(static_cast<std::size_t>(idx), f);
            }
            out(t, f) = acc;
        }
    }
    return out;
}

Matrix cumulative_sum(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t f = 0; f < m.cols(); ++f) {
        double acc = 0.0;
        for (std::size_t t = 0; t < m.rows(); ++t) {
            acc += m(t, f);
            out(t, f) = acc;
        }
    }
    return out;
}

namespace {

// Fenwick tree over compressed sample ranks.
class BitCounter {
public:
    explicit BitCounter(std::size_t n) : tree_(n + 1, 0) {}

    void add(std::size_t rank) {
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += 1;
    }

    // Number of inserted values with rank < rank.
    std::size_t count_below(std::size_t rank) const {
        std::size_t sum = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) sum += tree_[i];
        return sum;
    }

private:
    std::vector<std::size_t> tree_;
};

}  // namespace

Matrix reversal_counts(const Matrix& m) {
    const std::size_t T = m.rows();
    Matrix out(T, m.cols());
    std::vector<double> column(T), sorted(T);
    for (std::size_t f = 0; f < m.cols(); ++f) {
        for (std::size_t t = 0; t < T; ++t) column[t] = m(t, f);
        sorted = column;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        BitCounter counter(sorted.size());
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t rank = static_cast<std::size_t>(
                std::lower_bound(sorted.begin(), sorted.end(), column[t]) - sorted.begin());
            out(t, f) = static_cast<double>(counter.count_below(rank));
            counter.add(rank);
        }
    }
    return out;
}

std::pair<Matrix, Matrix> cusum(const Matrix& m, const CusumParams& params) {
    const std::size_t T = m.rows();
    const std::size_t F = m.cols();
    if (params.init_period < 1 || params.init_period > T) {
        throw std::invalid_argument("cusum: init_period must be in [1, T]");
    }

    Matrix g_plus(T, F), g_minus(T, F);
    std::vector<double> s(T);
    for (std::size_t f = 0; f < F; ++f) {
        if (params.mode == CusumParams::Mode::F1) {
            for (std::size_t t = 0; t < T; ++t) s[t] = m(t, f);
        } else {
            s[0] = 0.0;  // no predecessor, same causal rule as the edge kernel
            for (std::size_t t = 1; t < T; ++t) s[t] = m(t, f) - m(t - 1, f);
        }

        double target = 0.0;
        for (std::size_t t = 0; t < params.init_period; ++t) target += s[t];
        target /= static_cast<double>(params.init_period);

        double gp = 0.0, gm = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            gp = std::max(0.0, gp + s[t] - (target + params.slack));
            gm = std::max(0.0, gm - s[t] + (target - params.slack));
            g_plus(t, f) = gp;
            g_minus(t, f) = gm;
        }
    }
    return {std::move(g_plus), std::move(g_minus)};
}

StackConfig StackConfig::all() {
    StackConfig c;
    for (std::size_t i = 1; i < kFeatureIdCount; ++i) c.enabled.push_back(static_cast<FeatureId>(i));
    return c;
}

StackConfig StackConfig::original() { return StackConfig{}; }

bool StackConfig::is_enabled(FeatureId id) const {
    if (id == FeatureId::Original) return true;
    return std::find(enabled.begin(), enabled.end(), id) != enabled.end();
}

namespace {

// Window-local min-max per attribute. Cumulative and CUSUM channels grow
// with T, so each derived channel is squeezed back into [0, 1] before it
// reaches the network. Constant attributes map to 0.
void rescale_unit(Matrix& m) {
    for (std::size_t f = 0; f < m.cols(); ++f) {
        double lo = m(0, f), hi = m(0, f);
        for (std::size_t t = 1; t < m.rows(); ++t) {
            lo = std::min(lo, m(t, f));
            hi = std::max(hi, m(t, f));
        }
        const double span = hi - lo;
        for (std::size_t t = 0; t < m.rows(); ++t) {
            m(t, f) = span > 0.0 ? (m(t, f) - lo) / span : 0.0;
        }
    }
}

}  // namespace

FeatureStack build_feature_stack(const Matrix& window, const StackConfig& config) {
    FeatureStack stack;
    stack.channels.emplace_back(FeatureId::Original, window);

    const std::size_t T = window.rows();
    const CusumParams::Mode f1 = CusumParams::Mode::F1;
    const CusumParams::Mode f2 = CusumParams::Mode::F2;
    const std::size_t init_period =
        config.cusum_init_period > 0 ? config.cusum_init_period : default_cusum_init_period(T);

    // Lazily computed CUSUM pairs; two channels share one evaluation.
    std::optional<std::pair<Matrix, Matrix>> cusum_f1, cusum_f2;
    auto cusum_for = [&](CusumParams::Mode mode) -> std::pair<Matrix, Matrix>& {
        auto& slot = mode == f1 ? cusum_f1 : cusum_f2;
        if (!slot) slot = cusum(window, CusumParams{mode, init_period, config.cusum_slack});
        return *slot;
    };

    for (std::size_t i = 1; i < kFeatureIdCount; ++i) {
        const auto id = static_cast<FeatureId>(i);
        if (!config.is_enabled(id)) continue;
        Matrix channel;
        switch (id) {
            case FeatureId::EdgeChange:
                channel = conv_time(window, config.wide_edge_kernel ? kEdgeKernelWide : kEdgeKernel,
                                    Padding::Causal);
                break;
            case FeatureId::Smoothed:
                channel = conv_time(window, kSmoothKernel, Padding::Replicate);
                break;
            case FeatureId::Blurred:
                channel = conv_time(window, kBlurKernel, Padding::Replicate);
                break;
            case FeatureId::CumulativeSum:
                channel = cumulative_sum(window);
                break;
            case FeatureId::ReversalCount:
                channel = reversal_counts(window);
                break;
            case FeatureId::CusumF1Pos:
                channel = cusum_for(f1).first;
                break;
            case FeatureId::CusumF1Neg:
                channel = cusum_for(f1).second;
                break;
            case FeatureId::CusumF2Pos:
                channel = cusum_for(f2).first;
                break;
            case FeatureId::CusumF2Neg:
                channel = cusum_for(f2).second;
                break;
            case FeatureId::Original:
                continue;
        }
        rescale_unit(channel);
        stack.channels.emplace_back(id, std::move(channel));
    }
    return stack;
}

std::vector<double> FeatureStack::to_input() const {
    const std::size_t T = time_length();
    const std::size_t F = attribute_count();
    std::vector<double> input;
    input.reserve(channels.size() * F * T);
    for (const auto& [id, m] : channels) {
        (void)id;
        for (std::size_t f = 0; f < F; ++f) {
            for (std::size_t t = 0; t < T; ++t) input.push_back(m(t, f));
        }
    }
    return input;
}

std::vector<unsigned char> render_image(const Matrix& m) {
    const std::size_t T = m.rows();
    const std::size_t F = m.cols();
    char header[64];
    const int header_len = std::snprintf(header, sizeof(header), "P5\n%zu %zu\n255\n", T, F);

    std::vector<unsigned char> bytes(header, header + header_len);
    if (T == 0 || F == 0) return bytes;
    bytes.reserve(bytes.size() + T * F);
    for (std::size_t f = 0; f < F; ++f) {
        double lo = m(0, f), hi = m(0, f);
        for (std::size_t t = 1; t < T; ++t) {
            lo = std::min(lo, m(t, f));
            hi = std::max(hi, m(t, f));
        }
        const double span = hi - lo;
        for (std::size_t t = 0; t < T; ++t) {
            double scaled = span > 0.0 ? (m(t, f) - lo) / span * 255.0 : 0.0;
            if (scaled < 0.0) scaled = 0.0;
            if (scaled > 255.0) scaled = 255.0;
            bytes.push_back(static_cast<unsigned char>(scaled));
        }
    }
    return bytes;
}

void save_pgm(const Matrix& m, const std::string& path) {
    const auto bytes = render_image(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace prefail
