#include "resfed/param_vector.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>

#include "resfed/errors.hpp"

namespace resfed {

void ParamVector::validate_segments() const {
    if (segments.empty()) return;
    size_t expect = 0;
    for (const auto& s : segments) {
        if (s.offset != expect)
            throw ConfigError("segment '" + s.name + "' is not contiguous");
        expect += s.length;
    }
    if (expect != values.size())
        throw ConfigError("segments do not cover the parameter vector");
}

void check_same_shape(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size())
        throw ShapeError("parameter vectors differ in length: " +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

void check_finite(const ParamVector& v, const char* context) {
    for (float x : v.values)
        if (!std::isfinite(x))
            throw Error(std::string(context) + ": non-finite parameter value");
}

ParamVector add(const ParamVector& a, const ParamVector& b) {
    check_same_shape(a, b);
    ParamVector out;
    out.values.resize(a.size());
    out.segments = a.segments;
    for (size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] + b.values[i];
    return out;
}

ParamVector sub(const ParamVector& a, const ParamVector& b) {
    check_same_shape(a, b);
    ParamVector out;
    out.values.resize(a.size());
    out.segments = a.segments;
    for (size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
    return out;
}

uint64_t ulp_distance(float a, float b) {
    // Map the float ordering onto an unsigned integer ordering.
    auto key = [](float x) -> int64_t {
        int32_t i;
        std::memcpy(&i, &x, sizeof(i));
        int64_t mag = int64_t(i) & 0x7fffffffLL;
        return i < 0 ? 0x80000000LL - mag : 0x80000000LL + mag;
    };
    int64_t d = key(a) - key(b);
    return static_cast<uint64_t>(d < 0 ? -d : d);
}

} // namespace resfed
