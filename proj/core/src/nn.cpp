#include "prefail/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "prefail/binary_io.hpp"
#include "prefail/rng.hpp"

namespace prefail {

void ModelConfig::validate() const {
    if (input_channels == 0) throw std::invalid_argument("model: input_channels must be positive");
    if (input_length == 0) throw std::invalid_argument("model: input_length must be positive");
    if (conv1_filters == 0 || conv2_filters == 0) throw std::invalid_argument("model: filter counts must be positive");
    if (conv1_kernel == 0 || conv2_kernel == 0) throw std::invalid_argument("model: kernel widths must be positive");
    if (pool_width == 0) throw std::invalid_argument("model: pool_width must be positive");
    if (dense_width == 0) throw std::invalid_argument("model: dense_width must be positive");
    if (classes < 2) throw std::invalid_argument("model: classes must be at least 2");
    if (input_length < conv1_kernel) throw std::invalid_argument("model: input_length shorter than conv1_kernel");
    if (conv1_out() < conv2_kernel) throw std::invalid_argument("model: conv1 output shorter than conv2_kernel");
    if (conv2_out() < pool_width) throw std::invalid_argument("model: conv2 output shorter than pool_width");
}

ModelConfig paper_scale_config(std::size_t input_channels, std::size_t input_length) {
    ModelConfig config;
    config.input_channels = input_channels;
    config.input_length = input_length;
    config.conv1_filters = 256;
    config.conv2_filters = 256;
    config.dense_width = 160;
    return config;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
}

bool Classifier::weights_finite() const {
    for (const auto* w : {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense1_w, &dense1_b, &dense2_w, &dense2_b}) {
        for (double v : *w) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

std::vector<double> conv1d_forward(const std::vector<double>& input, std::size_t channels,
                                   std::size_t length, const std::vector<double>& kernels,
                                   std::size_t filters, std::size_t kernel_width,
                                   const std::vector<double>& bias) {
    if (length < kernel_width) throw std::invalid_argument("conv1d: input shorter than kernel");
    if (input.size() != channels * length) throw std::invalid_argument("conv1d: input size mismatch");
    if (kernels.size() != filters * channels * kernel_width) throw std::invalid_argument("conv1d: kernel size mismatch");
    if (bias.size() != filters) throw std::invalid_argument("conv1d: bias size mismatch");

    const std::size_t out_len = length - kernel_width + 1;
    std::vector<double> out(filters * out_len);
    for (std::size_t n = 0; n < filters; ++n) {
        for (std::size_t t = 0; t < out_len; ++t) {
            double acc = bias[n];
            for (std::size_t c = 0; c < channels; ++c) {
                const double* in = input.data() + c * length + t;
                const double* w = kernels.data() + (n * channels + c) * kernel_width;
                for (std::size_t k = 0; k < kernel_width; ++k) acc += w[k] * in[k];
            }
            out[n * out_len + t] = acc;
        }
    }
    return out;
}

std::vector<double> maxpool1d(const std::vector<double>& input, std::size_t channels,
                              std::size_t length, std::size_t width) {
    if (length < width) throw std::invalid_argument("maxpool1d: input shorter than pool width");
    if (input.size() != channels * length) throw std::invalid_argument("maxpool1d: input size mismatch");
    const std::size_t out_len = length / width;
    std::vector<double> out(channels * out_len);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t p = 0; p < out_len; ++p) {
            double best = input[c * length + p * width];
            for (std::size_t k = 1; k < width; ++k) best = std::max(best, input[c * length + p * width + k]);
            out[c * out_len + p] = best;
        }
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : logits) hi = std::max(hi, v);
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - hi);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double cross_entropy(const std::vector<double>& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
        throw std::invalid_argument("cross_entropy: label out of range");
    }
    double p = probs[static_cast<std::size_t>(label)];
    // Written so a NaN probability stays NaN and surfaces as divergence.
    if (p < 1e-12) p = 1e-12;
    return -std::log(p);
}

namespace {

struct ForwardCache {
    std::vector<double> conv1_pre, conv1_act;
    std::vector<double> conv2_pre, conv2_act;
    std::vector<double> pool_out;
    std::vector<std::size_t> pool_arg;
    std::vector<double> dense1_pre, dense1_act;
    std::vector<double> logits, probs;
};

void relu(const std::vector<double>& pre, std::vector<double>& act) {
    act.resize(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) act[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

void forward_cached(const Classifier& model, const double* input, ForwardCache& cache) {
    const ModelConfig& cfg = model.config;
    const std::size_t C = cfg.input_channels, T = cfg.input_length;
    const std::size_t N1 = cfg.conv1_filters, K1 = cfg.conv1_kernel, L1 = cfg.conv1_out();
    const std::size_t N2 = cfg.conv2_filters, K2 = cfg.conv2_kernel, L2 = cfg.conv2_out();
    const std::size_t P = cfg.pool_width, Lp = cfg.pooled_out();
    const std::size_t M = cfg.dense_width, flat = cfg.flat_size();

    cache.conv1_pre.assign(N1 * L1, 0.0);
    for (std::size_t n = 0; n < N1; ++n) {
        for (std::size_t t = 0; t < L1; ++t) {
            double acc = model.conv1_b[n];
            for (std::size_t c = 0; c < C; ++c) {
                const double* in = input + c * T + t;
                const double* w = model.conv1_w.data() + (n * C + c) * K1;
                for (std::size_t k = 0; k < K1; ++k) acc += w[k] * in[k];
            }
            cache.conv1_pre[n * L1 + t] = acc;
        }
    }
    relu(cache.conv1_pre, cache.conv1_act);

    cache.conv2_pre.assign(N2 * L2, 0.0);
    for (std::size_t n = 0; n < N2; ++n) {
        for (std::size_t t = 0; t < L2; ++t) {
            double acc = model.conv2_b[n];
            for (std::size_t m = 0; m < N1; ++m) {
                const double* in = cache.conv1_act.data() + m * L1 + t;
                const double* w = model.conv2_w.data() + (n * N1 + m) * K2;
                for (std::size_t k = 0; k < K2; ++k) acc += w[k] * in[k];
            }
            cache.conv2_pre[n * L2 + t] = acc;
        }
    }
    relu(cache.conv2_pre, cache.conv2_act);

    cache.pool_out.assign(N2 * Lp, 0.0);
    cache.pool_arg.assign(N2 * Lp, 0);
    for (std::size_t n = 0; n < N2; ++n) {
        for (std::size_t p = 0; p < Lp; ++p) {
            std::size_t best = n * L2 + p * P;
            for (std::size_t k = 1; k < P; ++k) {
                const std::size_t idx = n * L2 + p * P + k;
                if (cache.conv2_act[idx] > cache.conv2_act[best]) best = idx;
            }
            cache.pool_out[n * Lp + p] = cache.conv2_act[best];
            cache.pool_arg[n * Lp + p] = best;
        }
    }

    cache.dense1_pre.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        double acc = model.dense1_b[m];
        const double* w = model.dense1_w.data() + m * flat;
        for (std::size_t i = 0; i < flat; ++i) acc += w[i] * cache.pool_out[i];
        cache.dense1_pre[m] = acc;
    }
    relu(cache.dense1_pre, cache.dense1_act);

    cache.logits.assign(cfg.classes, 0.0);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        double acc = model.dense2_b[c];
        const double* w = model.dense2_w.data() + c * M;
        for (std::size_t m = 0; m < M; ++m) acc += w[m] * cache.dense1_act[m];
        cache.logits[c] = acc;
    }
    cache.probs = softmax(cache.logits);
}

struct Gradients {
    std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, dense1_w, dense1_b, dense2_w, dense2_b;

    explicit Gradients(const ModelConfig& cfg)
        : conv1_w(cfg.conv1_filters * cfg.input_channels * cfg.conv1_kernel, 0.0),
          conv1_b(cfg.conv1_filters, 0.0),
          conv2_w(cfg.conv2_filters * cfg.conv1_filters * cfg.conv2_kernel, 0.0),
          conv2_b(cfg.conv2_filters, 0.0),
          dense1_w(cfg.dense_width * cfg.flat_size(), 0.0),
          dense1_b(cfg.dense_width, 0.0),
          dense2_w(cfg.classes * cfg.dense_width, 0.0),
          dense2_b(cfg.classes, 0.0) {}

    void zero() {
        for (auto* g : arrays()) std::fill(g->begin(), g->end(), 0.0);
    }

    std::vector<std::vector<double>*> arrays() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense1_w, &dense1_b, &dense2_w, &dense2_b};
    }
};

std::vector<std::vector<double>*> parameter_arrays(Classifier& model) {
    return {&model.conv1_w, &model.conv1_b, &model.conv2_w, &model.conv2_b,
            &model.dense1_w, &model.dense1_b, &model.dense2_w, &model.dense2_b};
}

// Accumulates d(loss)/d(params) for one sample into grads. ReLU subgradient
// at exactly zero is zero.
void backward(const Classifier& model, const double* input, int label, const ForwardCache& cache,
              Gradients& grads) {
    const ModelConfig& cfg = model.config;
    const std::size_t C = cfg.input_channels, T = cfg.input_length;
    const std::size_t N1 = cfg.conv1_filters, K1 = cfg.conv1_kernel, L1 = cfg.conv1_out();
    const std::size_t N2 = cfg.conv2_filters, K2 = cfg.conv2_kernel, L2 = cfg.conv2_out();
    const std::size_t Lp = cfg.pooled_out();
    const std::size_t M = cfg.dense_width, flat = cfg.flat_size();

    // Softmax + cross-entropy collapse to probs - onehot.
    std::vector<double> dlogits = cache.probs;
    dlogits[static_cast<std::size_t>(label)] -= 1.0;

    std::vector<double> ddense1_act(M, 0.0);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
        const double g = dlogits[c];
        for (std::size_t m = 0; m < M; ++m) {
            grads.dense2_w[c * M + m] += g * cache.dense1_act[m];
            ddense1_act[m] += g * model.dense2_w[c * M + m];
        }
        grads.dense2_b[c] += g;
    }

    std::vector<double> dflat(flat, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        if (cache.dense1_pre[m] <= 0.0) continue;
        const double g = ddense1_act[m];
        for (std::size_t i = 0; i < flat; ++i) {
            grads.dense1_w[m * flat + i] += g * cache.pool_out[i];
            dflat[i] += g * model.dense1_w[m * flat + i];
        }
        grads.dense1_b[m] += g;
    }

    std::vector<double> dconv2_act(N2 * L2, 0.0);
    for (std::size_t i = 0; i < N2 * Lp; ++i) dconv2_act[cache.pool_arg[i]] += dflat[i];

    std::vector<double> dconv1_act(N1 * L1, 0.0);
    for (std::size_t n = 0; n < N2; ++n) {
        for (std::size_t t = 0; t < L2; ++t) {
            if (cache.conv2_pre[n * L2 + t] <= 0.0) continue;
            const double g = dconv2_act[n * L2 + t];
            if (g == 0.0) continue;
            grads.conv2_b[n] += g;
            for (std::size_t m = 0; m < N1; ++m) {
                const double* in = cache.conv1_act.data() + m * L1 + t;
                double* gw = grads.conv2_w.data() + (n * N1 + m) * K2;
                const double* w = model.conv2_w.data() + (n * N1 + m) * K2;
                double* gin = dconv1_act.data() + m * L1 + t;
                for (std::size_t k = 0; k < K2; ++k) {
                    gw[k] += g * in[k];
                    gin[k] += g * w[k];
                }
            }
        }
    }

    for (std::size_t n = 0; n < N1; ++n) {
        for (std::size_t t = 0; t < L1; ++t) {
            if (cache.conv1_pre[n * L1 + t] <= 0.0) continue;
            const double g = dconv1_act[n * L1 + t];
            if (g == 0.0) continue;
            grads.conv1_b[n] += g;
            for (std::size_t c = 0; c < C; ++c) {
                const double* in = input + c * T + t;
                double* gw = grads.conv1_w.data() + (n * C + c) * K1;
                for (std::size_t k = 0; k < K1; ++k) gw[k] += g * in[k];
            }
        }
    }
}

void init_weights(Classifier& model, std::uint64_t seed) {
    const ModelConfig& cfg = model.config;
    model.conv1_w.resize(cfg.conv1_filters * cfg.input_channels * cfg.conv1_kernel);
    model.conv1_b.assign(cfg.conv1_filters, 0.0);
    model.conv2_w.resize(cfg.conv2_filters * cfg.conv1_filters * cfg.conv2_kernel);
    model.conv2_b.assign(cfg.conv2_filters, 0.0);
    model.dense1_w.resize(cfg.dense_width * cfg.flat_size());
    model.dense1_b.assign(cfg.dense_width, 0.0);
    model.dense2_w.resize(cfg.classes * cfg.dense_width);
    model.dense2_b.assign(cfg.classes, 0.0);

    Rng rng(derive_seed(seed, 0));
    auto fill_uniform = [&rng](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : w) v = rng.next_double(-bound, bound);
    };
    fill_uniform(model.conv1_w, cfg.input_channels * cfg.conv1_kernel, cfg.conv1_filters * cfg.conv1_kernel);
    fill_uniform(model.conv2_w, cfg.conv1_filters * cfg.conv2_kernel, cfg.conv2_filters * cfg.conv2_kernel);
    fill_uniform(model.dense1_w, cfg.flat_size(), cfg.dense_width);
    fill_uniform(model.dense2_w, cfg.dense_width, cfg.classes);
}

class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr, Classifier& model) : kind_(kind), lr_(lr) {
        if (kind_ == OptimizerKind::Adam) {
            for (auto* p : parameter_arrays(model)) {
                m_.emplace_back(p->size(), 0.0);
                v_.emplace_back(p->size(), 0.0);
            }
        }
    }

    void step(Classifier& model, Gradients& grads) {
        const auto params = parameter_arrays(model);
        const auto gs = grads.arrays();
        if (kind_ == OptimizerKind::Sgd) {
            for (std::size_t a = 0; a < params.size(); ++a) {
                for (std::size_t i = 0; i < params[a]->size(); ++i) {
                    (*params[a])[i] -= lr_ * (*gs[a])[i];
                }
            }
            return;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        for (std::size_t a = 0; a < params.size(); ++a) {
            auto& m = m_[a];
            auto& v = v_[a];
            for (std::size_t i = 0; i < params[a]->size(); ++i) {
                const double g = (*gs[a])[i];
                m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
                v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
                (*params[a])[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
            }
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    OptimizerKind kind_;
    double lr_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace

std::vector<double> forward(const Classifier& model, const std::vector<double>& input) {
    if (input.size() != model.config.input_size()) {
        throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                    " values, model expects " + std::to_string(model.config.input_size()));
    }
    ForwardCache cache;
    forward_cached(model, input.data(), cache);
    return cache.probs;
}

Prediction predict(const Classifier& model, const std::vector<double>& input) {
    Prediction prediction;
    prediction.probabilities = forward(model, input);
    // >= prefers the later class on an exact tie; for binary output that is
    // the failure class.
    std::size_t best = 0;
    for (std::size_t c = 1; c < prediction.probabilities.size(); ++c) {
        if (prediction.probabilities[c] >= prediction.probabilities[best]) best = c;
    }
    prediction.label = static_cast<int>(best);
    return prediction;
}

Classifier train(const ModelConfig& model_config, const TrainConfig& train_config,
                 const std::vector<TrainInstance>& instances) {
    model_config.validate();
    train_config.validate();
    if (instances.empty()) throw std::invalid_argument("train: no instances");
    for (const auto& inst : instances) {
        if (inst.input.size() != model_config.input_size()) {
            throw std::invalid_argument("train: instance size mismatch");
        }
        if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= model_config.classes) {
            throw std::invalid_argument("train: label out of range");
        }
    }

    Classifier model;
    model.config = model_config;
    model.seed = train_config.seed;
    model.train_config = train_config;
    init_weights(model, train_config.seed);

    Optimizer optimizer(train_config.optimizer, train_config.learning_rate, model);
    Gradients grads(model_config);
    ForwardCache cache;

    std::vector<std::size_t> order(instances.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    for (std::size_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        Rng rng(derive_seed(train_config.seed, 1 + epoch));
        rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
            const std::size_t end = std::min(order.size(), start + train_config.batch_size);
            grads.zero();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                const TrainInstance& inst = instances[order[i]];
                forward_cached(model, inst.input.data(), cache);
                batch_loss += cross_entropy(cache.probs, inst.label);
                backward(model, inst.input.data(), inst.label, cache, grads);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (auto* g : grads.arrays()) {
                for (double& v : *g) v *= scale;
            }
            optimizer.step(model, grads);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(order.size());
        model.loss_curve.push_back(epoch_loss);
        model.epochs_run = static_cast<std::uint32_t>(epoch + 1);

        if (!std::isfinite(epoch_loss) || !model.weights_finite()) {
            throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch + 1) +
                                     " (non-finite loss or weights); lower the learning rate");
        }

        if (train_config.plateau_patience > 0) {
            if (epoch_loss < best_loss - train_config.plateau_min_delta) {
                best_loss = epoch_loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= train_config.plateau_patience) {
                break;
            }
        }
    }
    return model;
}

double gradient_check(const ModelConfig& config, std::uint64_t seed) {
    config.validate();

    Classifier model;
    model.config = config;
    init_weights(model, seed);

    Rng rng(derive_seed(seed, 1));
    const std::size_t batch = 3;
    std::vector<TrainInstance> instances(batch);
    for (auto& inst : instances) {
        inst.input.resize(config.input_size());
        for (double& v : inst.input) v = rng.next_double(-1.0, 1.0);
        inst.label = static_cast<int>(rng.next_below(config.classes));
    }

    ForwardCache cache;
    Gradients grads(config);
    for (const auto& inst : instances) {
        forward_cached(model, inst.input.data(), cache);
        backward(model, inst.input.data(), inst.label, cache, grads);
    }
    const double scale = 1.0 / static_cast<double>(batch);
    for (auto* g : grads.arrays()) {
        for (double& v : *g) v *= scale;
    }

    auto batch_loss = [&]() {
        double total = 0.0;
        for (const auto& inst : instances) {
            forward_cached(model, inst.input.data(), cache);
            total += cross_entropy(cache.probs, inst.label);
        }
        return total * scale;
    };

    const double h = 1e-5;
    double max_rel_err = 0.0;
    const auto params = parameter_arrays(model);
    auto grad_arrays = grads.arrays();
    for (std::size_t a = 0; a < params.size(); ++a) {
        std::vector<double>& w = *params[a];
        const std::vector<double>& g = *grad_arrays[a];
        // Sample up to 10 coordinates per tensor so every layer is covered.
        const std::size_t samples = std::min<std::size_t>(w.size(), 10);
        for (std::size_t s = 0; s < samples; ++s) {
            const std::size_t i = w.size() <= 10 ? s : static_cast<std::size_t>(rng.next_below(w.size()));
            const double saved = w[i];
            w[i] = saved + h;
            const double up = batch_loss();
            w[i] = saved - h;
            const double down = batch_loss();
            w[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::max({std::abs(g[i]), std::abs(fd), 1e-8});
            max_rel_err = std::max(max_rel_err, std::abs(g[i] - fd) / denom);
        }
    }
    return max_rel_err;
}

namespace {
constexpr char kModelMagic[8] = {'P', 'F', 'M', 'O', 'D', 'L', '0', '1'};
constexpr std::uint32_t kModelVersion = 1;

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    io::write_u64(out, v.size());
    for (double x : v) io::write_f64(out, x);
}

std::vector<double> read_doubles(std::istream& in) {
    const std::uint64_t n = io::read_u64(in);
    std::vector<double> v(n);
    for (double& x : v) x = io::read_f64(in);
    return v;
}
}  // namespace

void write_classifier(std::ostream& out, const Classifier& model, const PipelineConfig* pipeline) {
    io::write_magic(out, kModelMagic);
    io::write_u32(out, kModelVersion);

    const ModelConfig& cfg = model.config;
    for (std::size_t v : {cfg.input_channels, cfg.input_length, cfg.conv1_filters, cfg.conv1_kernel,
                          cfg.conv2_filters, cfg.conv2_kernel, cfg.pool_width, cfg.dense_width, cfg.classes}) {
        io::write_u32(out, static_cast<std::uint32_t>(v));
    }

    for (const auto* w : {&model.conv1_w, &model.conv1_b, &model.conv2_w, &model.conv2_b,
                          &model.dense1_w, &model.dense1_b, &model.dense2_w, &model.dense2_b}) {
        write_doubles(out, *w);
    }

    io::write_u64(out, model.seed);
    io::write_u32(out, model.epochs_run);
    write_doubles(out, model.loss_curve);
    io::write_u32(out, static_cast<std::uint32_t>(model.train_config.epochs));
    io::write_u32(out, static_cast<std::uint32_t>(model.train_config.batch_size));
    io::write_f64(out, model.train_config.learning_rate);
    io::write_u8(out, static_cast<std::uint8_t>(model.train_config.optimizer));
    io::write_u32(out, static_cast<std::uint32_t>(model.train_config.plateau_patience));
    io::write_f64(out, model.train_config.plateau_min_delta);

    io::write_u8(out, pipeline ? 1 : 0);
    if (pipeline) {
        io_detail::write_window_spec(out, pipeline->window_spec);
        io_detail::write_stack_config(out, pipeline->stack_config);
        io_detail::write_normalizer(out, pipeline->normalizer);
        io::write_u32(out, static_cast<std::uint32_t>(pipeline->attribute_columns.size()));
        for (const auto& name : pipeline->attribute_columns) io::write_string(out, name);
    }
}

Classifier read_classifier(std::istream& in, std::optional<PipelineConfig>* pipeline) {
    io::expect_magic(in, kModelMagic, "model");
    io::expect_version(in, kModelVersion, "model");

    Classifier model;
    ModelConfig& cfg = model.config;
    for (std::size_t* v : {&cfg.input_channels, &cfg.input_length, &cfg.conv1_filters, &cfg.conv1_kernel,
                           &cfg.conv2_filters, &cfg.conv2_kernel, &cfg.pool_width, &cfg.dense_width, &cfg.classes}) {
        *v = io::read_u32(in);
    }
    cfg.validate();

    for (auto* w : {&model.conv1_w, &model.conv1_b, &model.conv2_w, &model.conv2_b,
                    &model.dense1_w, &model.dense1_b, &model.dense2_w, &model.dense2_b}) {
        *w = read_doubles(in);
    }

    model.seed = io::read_u64(in);
    model.epochs_run = io::read_u32(in);
    model.loss_curve = read_doubles(in);
    model.train_config.epochs = io::read_u32(in);
    model.train_config.batch_size = io::read_u32(in);
    model.train_config.learning_rate = io::read_f64(in);
    model.train_config.optimizer = static_cast<OptimizerKind>(io::read_u8(in));
    model.train_config.plateau_patience = io::read_u32(in);
    model.train_config.plateau_min_delta = io::read_f64(in);
    model.train_config.seed = model.seed;

    const bool has_pipeline = io::read_u8(in) != 0;
    if (pipeline) pipeline->reset();
    if (has_pipeline) {
        PipelineConfig p;
        p.window_spec = io_detail::read_window_spec(in);
        p.stack_config = io_detail::read_stack_config(in);
        p.normalizer = io_detail::read_normalizer(in);
        const std::uint32_t n = io::read_u32(in);
        for (std::uint32_t i = 0; i < n; ++i) p.attribute_columns.push_back(io::read_string(in));
        if (pipeline) *pipeline = std::move(p);
    }

    const std::size_t expected[] = {cfg.conv1_filters * cfg.input_channels * cfg.conv1_kernel,
                                    cfg.conv1_filters,
                                    cfg.conv2_filters * cfg.conv1_filters * cfg.conv2_kernel,
                                    cfg.conv2_filters,
                                    cfg.dense_width * cfg.flat_size(),
                                    cfg.dense_width,
                                    cfg.classes * cfg.dense_width,
                                    cfg.classes};
    const std::vector<double>* actual[] = {&model.conv1_w, &model.conv1_b, &model.conv2_w, &model.conv2_b,
                                           &model.dense1_w, &model.dense1_b, &model.dense2_w, &model.dense2_b};
    for (std::size_t i = 0; i < 8; ++i) {
        if (actual[i]->size() != expected[i]) throw std::runtime_error("model file: weight block size mismatch");
    }
    return model;
}

void save_classifier(const Classifier& model, const std::string& path, const PipelineConfig* pipeline) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_classifier(out, model, pipeline);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

Classifier load_classifier(const std::string& path, std::optional<PipelineConfig>* pipeline) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_classifier(in, pipeline);
}

}  // namespace prefail
