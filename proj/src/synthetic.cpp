#include "dsg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dsg/error.hpp"
#include "dsg/optim.hpp"

namespace dsg {

std::size_t SyntheticSpec::phases() const {
  if (rule == PhaseRule::kPresentSet) return std::size_t{1} << (n_classes - 1);
  return 2;
}

namespace {

struct Rect {
  std::size_t r0, c0, h, w;
  bool overlaps(const Rect& o) const {
    return r0 < o.r0 + o.h && o.r0 < r0 + h && c0 < o.c0 + o.w && o.c0 < c0 + w;
  }
};

Tensor2 orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
  Tensor2 q(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (;;) {
      std::vector<double> v(dim);
      for (double& x : v) x = rng.normal();
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += v[k] * q(j, k);
        for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * q(j, k);
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-6) continue;
      for (std::size_t k = 0; k < dim; ++k) q(i, k) = v[k] / norm;
      break;
    }
  }
  return q;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return aa > 0.0 && bb > 0.0 ? ab / std::sqrt(aa * bb) : 0.0;
}

void validate(const SyntheticSpec& s) {
  if (s.n_classes < 2) throw InvalidArgument("synthetic: need at least 2 classes");
  if (s.feature_dim < s.n_classes)
    throw InvalidArgument("synthetic: feature dim " + std::to_string(s.feature_dim) +
                          " < class count " + std::to_string(s.n_classes) +
                          "; class means cannot be orthogonalized");
  if (s.window == 0 || s.clips == 0) throw InvalidArgument("synthetic: empty window or clip count");
  if (s.grid.size() == 0) throw InvalidArgument("synthetic: empty grid");
  if (s.noise < 0.0 || s.jitter < 0.0) throw InvalidArgument("synthetic: negative noise");
  if (s.val_clips + s.test_clips > s.clips)
    throw InvalidArgument("synthetic: val + test clips exceed clip count");
  if (s.rule != PhaseRule::kPresentSet && (s.key_class == 0 || s.key_class >= s.n_classes))
    throw InvalidArgument("synthetic: key class must be a foreground class");
  if (s.rule == PhaseRule::kTemporalEvent && s.window < 4)
    throw InvalidArgument("synthetic: the temporal-event rule needs a window of at least 4");
  if (s.min_side == 0 || s.min_side > s.max_side || s.key_min_side == 0 ||
      s.key_min_side > s.key_max_side)
    throw InvalidArgument("synthetic: bad rectangle side range");
  if (std::max(s.max_side, s.key_max_side) > std::min(s.grid.rows, s.grid.cols))
    throw InvalidArgument("synthetic: rectangles do not fit the grid");
  if (std::abs(s.key_background_cosine) >= 1.0)
    throw InvalidArgument("synthetic: key/background cosine must lie in (-1, 1)");
}

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.index(hi - lo + 1);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t d = spec.feature_dim;
  const std::size_t n = spec.grid.size();
  const std::size_t w = spec.window;
  const std::size_t classes = spec.n_classes;
  const double unit = std::sqrt(static_cast<double>(d));

  SyntheticData out;
  Rng global(spec.seed);
  const Tensor2 basis = orthonormal_rows(classes, d, global);
  out.class_means = Tensor2(classes, d);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < d; ++k) {
      double v = basis(c, k);
      if (spec.rule != PhaseRule::kPresentSet && c == spec.key_class &&
          spec.key_background_cosine != 0.0) {
        const double cs = spec.key_background_cosine;
        v = cs * basis(0, k) + std::sqrt(1.0 - cs * cs) * basis(c, k);
      }
      out.class_means(c, k) = unit * v;
    }
  }

  ClipDataset& ds = out.dataset;
  ds.window = w;
  ds.patches = n;
  ds.dim = d;
  ds.grid = spec.grid;
  ds.phases = spec.phases();
  ds.classes = classes;

  for (std::size_t clip = 0; clip < spec.clips; ++clip) {
    Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL * (clip + 1));

    // presence[c][t]
    std::vector<std::vector<bool>> presence(classes, std::vector<bool>(w, false));
    std::size_t phase = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      const bool on = rng.uniform() < spec.presence;
      if (spec.rule == PhaseRule::kTemporalEvent && c == spec.key_class) continue;
      std::fill(presence[c].begin(), presence[c].end(), on);
      if (spec.rule == PhaseRule::kPresentSet && on) phase |= std::size_t{1} << (c - 1);
      if (spec.rule == PhaseRule::kKeyClass && c == spec.key_class) phase = on ? 1 : 0;
    }
    if (spec.rule == PhaseRule::kTemporalEvent) {
      auto& key = presence[spec.key_class];
      switch (rng.index(4)) {
        case 0:
          break;
        case 1:
          key[w - 2] = key[w - 1] = true;
          break;
        case 2: {
          const std::size_t s = rng.index(w - 3);
          key[s] = key[s + 1] = true;
          break;
        }
        default: {
          const std::size_t s = rng.index(w - 2);
          for (std::size_t t = s; t < w; ++t) key[t] = true;
        }
      }
      phase = 0;
      for (std::size_t t = 0; t + 2 < w; ++t)
        if (key[t]) phase = 1;
    }

    // Regions are disjoint rectangles; a layout that boxes itself in is
    // redrawn from scratch.
    std::vector<Rect> rects;
    std::vector<std::size_t> rect_class;
    bool complete = false;
    for (int layout = 0; layout < 100 && !complete; ++layout) {
      rects.clear();
      rect_class.clear();
      complete = true;
      for (std::size_t c = 1; c < classes && complete; ++c) {
        if (std::none_of(presence[c].begin(), presence[c].end(), [](bool b) { return b; }))
          continue;
        const bool key = spec.rule != PhaseRule::kPresentSet && c == spec.key_class;
        const std::size_t lo = key ? spec.key_min_side : spec.min_side;
        const std::size_t hi = key ? spec.key_max_side : spec.max_side;
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
          Rect r;
          r.h = draw_between(rng, lo, hi);
          r.w = draw_between(rng, lo, hi);
          r.r0 = rng.index(spec.grid.rows - r.h + 1);
          r.c0 = rng.index(spec.grid.cols - r.w + 1);
          if (std::any_of(rects.begin(), rects.end(), [&](const Rect& o) { return r.overlaps(o); }))
            continue;
          rects.push_back(r);
          rect_class.push_back(c);
          placed = true;
        }
        complete = placed;
      }
    }
    if (!complete)
      throw InvalidArgument("synthetic: cannot place disjoint regions on a " +
                            std::to_string(spec.grid.rows) + "x" + std::to_string(spec.grid.cols) +
                            " grid");

    DatasetEntry e;
    char id[32];
    std::snprintf(id, sizeof id, "clip%04zu", clip);
    e.id = id;
    if (clip >= spec.clips - spec.test_clips) e.split = "test";
    else if (clip >= spec.clips - spec.test_clips - spec.val_clips) e.split = "val";
    e.clip.window = w;
    e.clip.patches = n;
    e.clip.dim = d;
    e.clip.grid = spec.grid;
    e.clip.phase_label = phase;
    e.clip.features = Tensor2(w * n, d);

    Tensor2 appearance(n, d);
    for (double& v : appearance.values()) v = spec.noise * rng.normal();

    for (std::size_t t = 0; t < w; ++t) {
      SegmentationMap mask;
      mask.frame_id = static_cast<std::int64_t>(clip * w + t);
      mask.grid = spec.grid;
      mask.labels.assign(n, 0);
      for (std::size_t i = 0; i < rects.size(); ++i) {
        if (!presence[rect_class[i]][t]) continue;
        const Rect& r = rects[i];
        for (std::size_t y = r.r0; y < r.r0 + r.h; ++y)
          for (std::size_t x = r.c0; x < r.c0 + r.w; ++x)
            mask.labels[y * spec.grid.cols + x] = static_cast<std::int64_t>(rect_class[i]);
      }
      for (std::size_t p = 0; p < n; ++p) {
        auto row = e.clip.features.row(node_index(t, p, n));
        const auto cls = static_cast<std::size_t>(mask.labels[p]);
        for (std::size_t k = 0; k < d; ++k)
          row[k] = out.class_means(cls, k) + appearance(p, k) +
                   spec.noise * spec.jitter * rng.normal();
      }
      e.clip.frame_ids.push_back(mask.frame_id);
      e.masks.push_back(std::move(mask));
    }

    if (spec.emit_matches) {
      ClipMatches m;
      for (std::size_t t = 0; t + 1 < w; ++t) {
        MatchList list;
        for (std::size_t p = 0; p < n; ++p) {
          const double conf = std::clamp(cosine(e.clip.features.row(node_index(t, p, n)),
                                                e.clip.features.row(node_index(t + 1, p, n))),
                                         0.0, 1.0);
          list.pairs.push_back({p, p, conf});
        }
        m[t] = std::move(list);
      }
      e.matches = std::move(m);
    }
    ds.entries.push_back(std::move(e));
  }

  // Up to five annotated frames per class, first come first served over the
  // training split.
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t taken = 0;
    for (std::size_t i = 0; i < ds.entries.size() && taken < 5; ++i) {
      const DatasetEntry& e = ds.entries[i];
      if (e.split != "train") continue;
      for (std::size_t t = 0; t < w && taken < 5; ++t) {
        const auto& labels = e.masks[t].labels;
        if (std::find(labels.begin(), labels.end(), static_cast<std::int64_t>(c)) == labels.end())
          continue;
        chosen.insert({i, t});
        ++taken;
        break;
      }
    }
  }
  for (const auto& [i, t] : chosen)
    out.annotations.push_back({ds.entries[i].masks[t], ds.entries[i].id});
  return out;
}

std::vector<AnnotatedFrame> resolve_annotations(const ClipDataset& dataset,
                                                const std::vector<Annotation>& annotations) {
  std::vector<AnnotatedFrame> frames;
  for (const Annotation& a : annotations) {
    const DatasetEntry* hit = nullptr;
    std::size_t frame = 0;
    for (const DatasetEntry& e : dataset.entries) {
      if (!a.clip.empty() && e.id != a.clip) continue;
      auto it = std::find(e.clip.frame_ids.begin(), e.clip.frame_ids.end(), a.map.frame_id);
      if (it == e.clip.frame_ids.end()) continue;
      hit = &e;
      frame = static_cast<std::size_t>(it - e.clip.frame_ids.begin());
      break;
    }
    if (hit == nullptr)
      throw InvalidArgument("annotation for frame " + std::to_string(a.map.frame_id) +
                            (a.clip.empty() ? std::string() : " of clip " + a.clip) +
                            " matches no dataset frame");
    if (!(a.map.grid == hit->clip.grid))
      throw ShapeError("annotation grid for frame " + std::to_string(a.map.frame_id) +
                       " differs from the clip grid");
    frames.push_back({hit->clip.frame(frame), a.map.labels});
  }
  return frames;
}

std::vector<std::size_t> planted_node_labels(const DatasetEntry& entry, std::size_t last_frames) {
  const std::size_t w = entry.masks.size();
  const std::size_t keep = last_frames == 0 ? w : std::min(last_frames, w);
  std::vector<std::size_t> out;
  for (std::size_t t = w - keep; t < w; ++t)
    for (std::int64_t v : entry.masks[t].labels)
      out.push_back(v < 0 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(v));
  return out;
}

}  // namespace dsg
