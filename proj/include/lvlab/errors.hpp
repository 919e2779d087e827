#pragma once

#include <stdexcept>
#include <string>

namespace lvlab {

/// Error categories used across the library; each maps 1:1 to a documented
/// failure mode of some operation.
enum class errc {
    non_positive_utility,
    degenerate_population,
    bad_fraction,
    out_of_domain,
    absorbed,
    too_large,
    horizon_exceeds_ode,
    boundary_state,
    range_error,
    step_too_large,
    param_out_of_range,
    non_monotone,
    origin_or_boundary,
    root_not_bracketed,
    empty_sample,
    boundary_point,
    bad_config,
    internal
};

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

}  // namespace lvlab
