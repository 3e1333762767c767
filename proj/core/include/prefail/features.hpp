#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prefail/matrix.hpp"

namespace prefail {

// Derived channels computed from a device's event matrix. Enumeration order
// fixes the channel order inside a FeatureStack.
enum class FeatureId : std::uint32_t {
    Original = 0,
    EdgeChange,
    Smoothed,
    Blurred,
    CumulativeSum,
    ReversalCount,
    CusumF1Pos,
    CusumF1Neg,
    CusumF2Pos,
    CusumF2Neg,
};

inline constexpr std::size_t kFeatureIdCount = 10;

const char* feature_name(FeatureId id);
std::optional<FeatureId> feature_from_name(const std::string& name);

enum class Padding {
    // Last kernel tap sits on the current sample; the left edge replicates
    // x(0), so a difference kernel reads "no change" on day zero.
    Causal,
    // Kernel centered on the current sample; both edges replicate.
    Replicate,
};

struct CusumParams {
    enum class Mode : std::uint8_t { F1, F2 };  // F1 tracks x(t), F2 tracks the daily change
    Mode mode = Mode::F1;
    std::size_t init_period = 2;  // leading samples whose mean becomes the target
    double slack = 0.0;           // the K allowance, zero here
};

inline std::size_t default_cusum_init_period(std::size_t length) {
    const std::size_t quarter = length / 4;
    return quarter < 2 ? 2 : quarter;
}

extern const std::vector<double> kEdgeKernel;      // [-1, 1]
extern const std::vector<double> kEdgeKernelWide;  // [-1, 0, 1], optional alternate
extern const std::vector<double> kSmoothKernel;    // [0.25, 0.5, 0.25]
extern const std::vector<double> kBlurKernel;      // [1, 4, 6, 4, 1] / 16

// 1-D convolution of every attribute column along the time axis.
// Output shape equals input shape. Throws if the kernel is shorter than 2
// or longer than the series.
Matrix conv_time(const Matrix& m, const std::vector<double>& kernel, Padding padding);

// Running sum per attribute: out(t) = sum_{i<=t} x(i).
Matrix cumulative_sum(const Matrix& m);

// Per attribute, out(t) counts earlier samples strictly below x(t);
// out(0) = 0. Runs in O(T log T) per column via an order-statistics tree;
// tests hold it against the O(T^2) pair count.
Matrix reversal_counts(const Matrix& m);

// Accumulated positive and negative deviation from the initial-period mean.
// No reset on threshold: the sums run over the whole window.
std::pair<Matrix, Matrix> cusum(const Matrix& m, const CusumParams& params);

// Which derived channels to build and how. Original is always implied.
struct StackConfig {
    std::vector<FeatureId> enabled;  // derived channels; duplicates and Original ignored
    std::size_t cusum_init_period = 0;  // 0 = default_cusum_init_period(T)
    double cusum_slack = 0.0;
    bool wide_edge_kernel = false;  // use [-1, 0, 1] instead of [-1, 1]

    static StackConfig all();       // every derived channel
    static StackConfig original();  // no derived channels
    bool is_enabled(FeatureId id) const;
};

struct FeatureStack {
    // Original first, then enabled channels in FeatureId order.
    std::vector<std::pair<FeatureId, Matrix>> channels;

    std::size_t time_length() const { return channels.empty() ? 0 : channels.front().second.rows(); }
    std::size_t attribute_count() const { return channels.empty() ? 0 : channels.front().second.cols(); }

    // Flattens to the network input layout: channel-major, then attribute,
    // then time contiguous. Length = channels * attributes * T.
    std::vector<double> to_input() const;
    std::size_t input_channels() const { return channels.size() * attribute_count(); }
};

// Builds Original plus each enabled derived channel. Derived channels are
// re-normalized per attribute to [0, 1] over the window; Original passes
// through untouched.
FeatureStack build_feature_stack(const Matrix& window, const StackConfig& config);

// Grayscale view of an event matrix in the usual orientation: time on the
// horizontal axis, attributes on the vertical. Each attribute is min-max
// scaled to 0..255 (floor); constant attributes render black.
// Returns a binary PGM (P5) payload.
std::vector<unsigned char> render_image(const Matrix& m);
void save_pgm(const Matrix& m, const std::string& path);

}  // namespace prefail
