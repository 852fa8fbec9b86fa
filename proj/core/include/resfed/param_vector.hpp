#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace resfed {

/// Named contiguous slice of a flat parameter vector (one layer's weights
/// or biases).
struct Segment {
    std::string name;
    size_t offset = 0;
    size_t length = 0;

    bool operator==(const Segment&) const = default;
};

/// Flat vector of 32-bit floats with optional named layer segments.
///
/// The universal carrier for model weights, predictions, residuals and
/// gradients. Segments, when present, must tile the vector exactly.
struct ParamVector {
    std::vector<float> values;
    std::vector<Segment> segments;

    ParamVector() = default;
    explicit ParamVector(std::vector<float> v) : values(std::move(v)) {}
    explicit ParamVector(size_t n, float fill = 0.0f) : values(n, fill) {}

    size_t size() const { return values.size(); }
    float& operator[](size_t i) { return values[i]; }
    float operator[](size_t i) const { return values[i]; }

    bool operator==(const ParamVector& o) const { return values == o.values; }

    /// Throws ConfigError if segments do not tile the vector.
    void validate_segments() const;
};

/// Throws ShapeError unless a and b have the same length.
void check_same_shape(const ParamVector& a, const ParamVector& b);

/// Throws Error if any value is NaN or infinite.
void check_finite(const ParamVector& v, const char* context);

/// Elementwise a + b in ascending index order, 32-bit arithmetic.
ParamVector add(const ParamVector& a, const ParamVector& b);

/// Elementwise a - b in ascending index order, 32-bit arithmetic.
ParamVector sub(const ParamVector& a, const ParamVector& b);

/// Distance in representable floats between two finite values (0 = bit-equal).
uint64_t ulp_distance(float a, float b);

} // namespace resfed
