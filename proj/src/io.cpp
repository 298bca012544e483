#include "ticert/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ticert/error.hpp"

namespace ticert {

namespace {

using nlohmann::json;

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::size_t line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

[[noreturn]] void schema_error(const std::string& source, const std::string& text,
                               const std::string& key, const std::string& what) {
  fail("cli", ErrorCode::ParseError,
       source + ":" + std::to_string(line_of_key(text, key)) + ": field `" +
           key + "`: " + what);
}

Matrix read_matrix(const json& node, std::size_t n, const std::string& source,
                   const std::string& text, const std::string& key) {
  if (!node.is_array() || node.size() != n)
    schema_error(source, text, key,
                 "expected " + std::to_string(n) + " rows");
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = node[i];
    if (!row.is_array() || row.size() != n)
      schema_error(source, text, key,
                   "row " + std::to_string(i) + " must have " +
                       std::to_string(n) + " numbers");
    for (std::size_t j = 0; j < n; ++j) {
      if (!row[j].is_number())
        schema_error(source, text, key,
                     "entry (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") is not a number");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          row[j].get<double>();
    }
  }
  return m;
}

}  // namespace

ReversibleChain parse_chain_spec(const std::string& text,
                                 const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    fail("cli", ErrorCode::ParseError,
         source + ":" + std::to_string(line_of_offset(text, byte)) +
             ": malformed JSON (" + e.what() + ")");
  }
  if (!doc.is_object()) {
    fail("cli", ErrorCode::ParseError, source + ":1: top level must be an object");
  }
  if (!doc.contains("states") || !doc["states"].is_array() || doc["states"].empty())
    schema_error(source, text, "states", "required non-empty array of names");
  std::vector<std::string> labels;
  for (const auto& s : doc["states"]) {
    if (!s.is_string()) schema_error(source, text, "states", "names must be strings");
    labels.push_back(s.get<std::string>());
  }
  const auto n = labels.size();
  if (!doc.contains("rates")) schema_error(source, text, "rates", "required");
  const Matrix rates = read_matrix(doc["rates"], n, source, text, "rates");

  std::optional<FiniteMetricSpace> space;
  std::optional<ProbabilityVector> mu;
  try {
    if (!doc.contains("metric") ||
        (doc["metric"].is_string() && doc["metric"] == "discrete")) {
      space = FiniteMetricSpace::discrete(labels);
    } else if (doc["metric"].is_array()) {
      space.emplace(labels, read_matrix(doc["metric"], n, source, text, "metric"));
    } else {
      schema_error(source, text, "metric",
                   "expected a matrix or the string \"discrete\"");
    }
    if (doc.contains("mu")) {
      const auto& m = doc["mu"];
      if (!m.is_array() || m.size() != n)
        schema_error(source, text, "mu",
                     "expected " + std::to_string(n) + " weights");
      Vector w(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        if (!m[i].is_number()) schema_error(source, text, "mu", "weights must be numbers");
        w[static_cast<Eigen::Index>(i)] = m[i].get<double>();
      }
      mu.emplace(w);
    }
    return ReversibleChain(*space, rates, mu);
  } catch (const Error& e) {
    if (e.module() == "cli") throw;
    fail("cli", ErrorCode::InvariantViolation,
         source + ": " + e.what());
  }
}

ReversibleChain load_chain_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cli", ErrorCode::ParseError, path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_chain_spec(buf.str(), path);
}

}  // namespace ticert
