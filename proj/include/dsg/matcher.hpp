#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsg/tensor.hpp"

namespace dsg {

struct Match {
  std::size_t left = 0;
  std::size_t right = 0;
  double confidence = 0.0;
  friend bool operator==(const Match&, const Match&) = default;
};

/// Correspondences between frame t (left) and frame t + 1 (right). Each patch
/// index appears at most once per side.
struct MatchList {
  std::vector<Match> pairs;

  /// Throws FormatError naming the first pair that reuses a patch index.
  void validate_partial_matching() const;
  friend bool operator==(const MatchList&, const MatchList&) = default;
};

/// Match lists keyed by the earlier frame index t of the pair (t, t + 1).
using ClipMatches = std::map<std::size_t, MatchList>;

/// Source of frame-to-frame correspondences.
class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual MatchList match(const Tensor2& left, const Tensor2& right) const = 0;
};

/// Pair (i, j) is kept when j is i's most cosine-similar patch, i is j's, and
/// the similarity reaches `min_confidence`. Ties resolve to the lowest index.
MatchList mutual_nn_match(const Tensor2& left, const Tensor2& right, double min_confidence);

class MutualNearestNeighborMatcher final : public Matcher {
 public:
  explicit MutualNearestNeighborMatcher(double min_confidence = 0.7)
      : min_confidence_(min_confidence) {}
  MatchList match(const Tensor2& left, const Tensor2& right) const override {
    return mutual_nn_match(left, right, min_confidence_);
  }
  double min_confidence() const { return min_confidence_; }

 private:
  double min_confidence_;
};

/// Runs `matcher` over every consecutive frame pair of a (w·n) x d clip.
ClipMatches match_clip(const Matcher& matcher, const Tensor2& features, std::size_t window,
                       std::size_t patches);

// Match file: JSON lines, one record per frame pair:
//   {"t": 0, "pairs": [[i, j, conf], ...]}
void save_matches(const std::filesystem::path& path, const ClipMatches& matches);
ClipMatches load_matches(const std::filesystem::path& path);
ClipMatches parse_matches(const std::string& text, const std::string& source = "<memory>");

}  // namespace dsg
