#pragma once

#include <string>

#include "bailout/fvi.hpp"

namespace bailout {

// Versioned JSON document:
//   {"format": "bailout-policy-fit", "version": 1, "horizon": M, "num_nodes": N,
//    "seed": s, "config_hash": "...",
//    "steps": [{"t": t, "fitted": bool, "lambda": l, "cv_r2": r, "portfolio_size": p,
//               "negative_coefficients": c, "underdetermined": bool,
//               "beta": [[beta_i1, ..., beta_im] for each node i]}, ...]}
std::string policy_fit_to_json(const PolicyFit& fit);
PolicyFit policy_fit_from_json(const std::string& text);  // throws ParseError

void save_policy_fit(const PolicyFit& fit, const std::string& path);
PolicyFit load_policy_fit(const std::string& path);

}  // namespace bailout
