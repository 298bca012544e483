#pragma once

#include <string>

#include "ticert/chain.hpp"

namespace ticert {

// Chain-spec JSON: {"states": [...], "rates": [[...]], "mu": [...]?,
// "metric": [[...]] | "discrete"}. Syntax and schema problems raise
// cli.ParseError with a line number; chain contract violations raise
// cli.InvariantViolation naming the failing check.
ReversibleChain load_chain_spec(const std::string& path);
ReversibleChain parse_chain_spec(const std::string& text,
                                 const std::string& source = "<input>");

}  // namespace ticert
