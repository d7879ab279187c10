#pragma once

#include "emap/common.hpp"

namespace emap {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double reg_inc_beta(double a, double b, double x);

// CDF of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);

// Two-sided critical value t_{df, 1-alpha/2} for the given confidence level
// (confidence = 1 - alpha), found by bisection on the CDF. Accurate to 1e-6.
double t_critical(double df, double confidence);

}  // namespace emap
