#pragma once

// Uniform grids described as start:stop:step.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "purify/errors.hpp"

namespace purify {

/// Closed range sampled at a fixed step. The stop value is part of the range
/// when it lies within half a step of start + n * step; in that case the last
/// node is exactly `stop`.
struct Range {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    std::size_t size() const {
        if (!(step > 0.0) || !(stop >= start)) {
            throw ConfigError("range needs step > 0 and stop >= start");
        }
        const double span = (stop - start) / step;
        return static_cast<std::size_t>(std::floor(span + 0.5)) + 1;
    }

    std::vector<double> nodes() const {
        const std::size_t n = size();
        std::vector<double> out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = start + static_cast<double>(k) * step;
        if (n > 1) out.back() = stop;
        return out;
    }

    std::string to_string() const;
};

/// n equally spaced nodes on [lo, hi].
inline std::vector<double> uniform_axis(double lo, double hi, std::size_t n) {
    if (n < 2 || !(hi > lo)) throw ConfigError("uniform axis needs n >= 2 and hi > lo");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    v.back() = hi;
    return v;
}

/// Parses "start:stop:step" (a single number is a one-point range).
inline Range parse_range(const std::string& text) {
    std::vector<double> parts;
    std::size_t pos = 0;
    while (true) {
        const std::size_t colon = text.find(':', pos);
        const std::string piece = text.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(piece, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad range '" + text + "': expected start:stop:step");
        }
        if (used != piece.size()) throw ConfigError("bad range '" + text + "': trailing characters");
        parts.push_back(value);
        if (colon == std::string::npos) break;
        pos = colon + 1;
    }
    if (parts.size() == 1) return {parts[0], parts[0], 1.0};
    if (parts.size() != 3) throw ConfigError("bad range '" + text + "': expected start:stop:step");
    Range r{parts[0], parts[1], parts[2]};
    r.size();  // validates
    return r;
}

namespace detail {
inline std::string full_precision(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
}  // namespace detail

inline std::string Range::to_string() const {
    return detail::full_precision(start) + ":" + detail::full_precision(stop) + ":" +
           detail::full_precision(step);
}

}  // namespace purify
