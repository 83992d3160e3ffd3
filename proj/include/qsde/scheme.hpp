#pragma once

#include <string>

#include "qsde/errors.hpp"

namespace qsde {

enum class Scheme {
    scheme1,        // Euler-exponential for general SDEs
    implicit_v1,    // resolvent variant of scheme1
    scheme2,        // projected Euler-exponential (SSE)
    scheme3,        // projected resolvent variant (SSE)
    explicit_euler, // projected explicit Euler (SSE)
};

inline const char* scheme_name(Scheme s) {
    switch (s) {
    case Scheme::scheme1: return "scheme1";
    case Scheme::implicit_v1: return "implicit_v1";
    case Scheme::scheme2: return "scheme2";
    case Scheme::scheme3: return "scheme3";
    case Scheme::explicit_euler: return "explicit_euler";
    }
    return "?";
}

inline Scheme parse_scheme(const std::string& name) {
    if (name == "scheme1") return Scheme::scheme1;
    if (name == "implicit_v1") return Scheme::implicit_v1;
    if (name == "scheme2") return Scheme::scheme2;
    if (name == "scheme3") return Scheme::scheme3;
    if (name == "explicit_euler") return Scheme::explicit_euler;
    throw ConfigError("unknown scheme '" + name +
                      "' (valid: scheme1, implicit_v1, scheme2, scheme3, explicit_euler)");
}

inline bool is_sse_scheme(Scheme s) {
    return s == Scheme::scheme2 || s == Scheme::scheme3 || s == Scheme::explicit_euler;
}

} // namespace qsde
