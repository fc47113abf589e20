#pragma once

#include <string>

#include "lpvsyn/sdp/problem.hpp"

namespace lpvsyn::sdp {

/// Serializes the problem in the SDPA sparse text format (".dat-s"):
/// variable count, block count, signed block-size list (sign-constrained
/// scalars are gathered into one trailing diagonal block with negative size),
/// objective row, then one "var block i j value" line per nonzero with
/// 1-based upper-triangle indices. Comment lines carry labels and sign kinds
/// so that parse_sdpa reproduces the problem exactly; foreign readers ignore
/// them.
std::string export_sdpa(const SdpProblem& problem);

/// Parses SDPA sparse text. Emissions of export_sdpa round-trip exactly;
/// files from other tools map diagonal blocks to plain PSD blocks with
/// diagonal coefficients and leave every scalar free.
SdpProblem parse_sdpa(const std::string& text);

/// Dense JSON dump of the problem (debugging aid).
std::string problem_to_json(const SdpProblem& problem);

}  // namespace lpvsyn::sdp
