#include "dsg/matcher.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dsg/error.hpp"
#include "json.hpp"

namespace dsg {

void MatchList::validate_partial_matching() const {
  std::set<std::size_t> left_seen;
  std::set<std::size_t> right_seen;
  for (const Match& m : pairs) {
    const std::string pair = "[" + std::to_string(m.left) + ", " + std::to_string(m.right) + "]";
    if (!left_seen.insert(m.left).second)
      throw FormatError("duplicate left patch index " + std::to_string(m.left) + " in pair " + pair);
    if (!right_seen.insert(m.right).second)
      throw FormatError("duplicate right patch index " + std::to_string(m.right) + " in pair " +
                        pair);
  }
}

MatchList mutual_nn_match(const Tensor2& left, const Tensor2& right, double min_confidence) {
  if (left.cols() != right.cols()) {
    throw ShapeError("mutual_nn_match: feature dimensions differ (" + std::to_string(left.cols()) +
                     " vs " + std::to_string(right.cols()) + ")");
  }
  MatchList out;
  if (left.rows() == 0 || right.rows() == 0) return out;
  const Tensor2 sim = matmul_nt(normalize_rows(left), normalize_rows(right));

  std::vector<std::size_t> best_right(sim.rows(), 0);
  for (std::size_t i = 0; i < sim.rows(); ++i)
    for (std::size_t j = 1; j < sim.cols(); ++j)
      if (sim(i, j) > sim(i, best_right[i])) best_right[i] = j;

  std::vector<std::size_t> best_left(sim.cols(), 0);
  for (std::size_t j = 0; j < sim.cols(); ++j)
    for (std::size_t i = 1; i < sim.rows(); ++i)
      if (sim(i, j) > sim(best_left[j], j)) best_left[j] = i;

  for (std::size_t i = 0; i < sim.rows(); ++i) {
    const std::size_t j = best_right[i];
    if (best_left[j] != i) continue;
    const double s = sim(i, j);
    if (s < min_confidence) continue;
    out.pairs.push_back({i, j, std::clamp(s, 0.0, 1.0)});
  }
  return out;
}

ClipMatches match_clip(const Matcher& matcher, const Tensor2& features, std::size_t window,
                       std::size_t patches) {
  ClipMatches out;
  for (std::size_t t = 0; t + 1 < window; ++t) {
    out[t] = matcher.match(slice_rows(features, t * patches, (t + 1) * patches),
                           slice_rows(features, (t + 1) * patches, (t + 2) * patches));
  }
  return out;
}

void save_matches(const std::filesystem::path& path, const ClipMatches& matches) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open match file for writing: " + path.string());
  for (const auto& [t, list] : matches) {
    nlohmann::json rec;
    rec["t"] = t;
    rec["pairs"] = nlohmann::json::array();
    for (const Match& m : list.pairs) rec["pairs"].push_back({m.left, m.right, m.confidence});
    os << rec.dump() << '\n';
  }
  if (!os) throw FormatError("failed writing match file: " + path.string());
}

ClipMatches parse_matches(const std::string& text, const std::string& source) {
  ClipMatches out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": invalid JSON: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("t") || !rec["t"].is_number_unsigned() ||
        !rec.contains("pairs") || !rec["pairs"].is_array()) {
      throw FormatError(where + ": expected {\"t\": uint, \"pairs\": [...]}");
    }
    const auto t = rec["t"].get<std::size_t>();
    if (out.contains(t)) throw FormatError(where + ": duplicate record for t=" + std::to_string(t));
    MatchList list;
    for (const auto& p : rec["pairs"]) {
      if (!p.is_array() || p.size() != 3 || !p[0].is_number_unsigned() ||
          !p[1].is_number_unsigned() || !p[2].is_number()) {
        throw FormatError(where + ": pair must be [i, j, conf], got " + p.dump());
      }
      const double conf = p[2].get<double>();
      if (!(conf >= 0.0 && conf <= 1.0))
        throw FormatError(where + ": confidence outside [0, 1] in pair " + p.dump());
      list.pairs.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>(), conf});
    }
    try {
      list.validate_partial_matching();
    } catch (const FormatError& e) {
      throw FormatError(where + " (t=" + std::to_string(t) + "): " + e.what());
    }
    out.emplace(t, std::move(list));
  }
  return out;
}

ClipMatches load_matches(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open match file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_matches(ss.str(), path.string());
}

}  // namespace dsg
