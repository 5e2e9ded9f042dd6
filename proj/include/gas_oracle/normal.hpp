#pragma once

namespace gas_oracle {

/// Standard normal quantile z(p), p in (0, 1).
///
/// Wichura's AS 241 (PPND16) rational approximation, accurate to about 1e-16
/// relative. z(0.5) is exactly 0. Throws PreconditionError outside (0, 1).
double inverse_normal_cdf(double p);

/// Standard normal CDF via std::erfc.
double normal_cdf(double z);

}  // namespace gas_oracle
