#include "cellseg/gtprep.hpp"

#include <algorithm>

namespace cellseg {

SemanticMap instance_to_semantic(const InstanceMap& g, NeighborhoodSpec neighborhood) {
  validate_instance_map(g);
  const int k = neighborhood.k;
  if (k < 1) throw ValidationError("neighbourhood radius k must be >= 1");
  const Index rows = g.rows();
  const Index cols = g.cols();
  SemanticMap h = SemanticMap::Zero(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Index r0 = std::max<Index>(0, r - k);
    const Index r1 = std::min<Index>(rows - 1, r + k);
    for (Index c = 0; c < cols; ++c) {
      const Label label = g(r, c);
      if (label == 0) continue;
      const Index c0 = std::max<Index>(0, c - k);
      const Index c1 = std::min<Index>(cols - 1, c + k);
      int foreign = 0;
      for (Index rr = r0; rr <= r1 && foreign <= 1; ++rr) {
        for (Index cc = c0; cc <= c1; ++cc) {
          const Label other = g(rr, cc);
          if (other != 0 && other != label && ++foreign > 1) break;
        }
      }
      h(r, c) = foreign > 1 ? kTouching : kCell;
    }
  }
  return h;
}

OneHotMap one_hot(const SemanticMap& h) {
  validate_semantic_map(h);
  OneHotMap y(kNumClasses, h.rows(), h.cols());
  for (int l = 0; l < kNumClasses; ++l) y[l] = (h == l).cast<std::uint8_t>();
  return y;
}

ClassCounts class_counts(const SemanticMap& h) {
  validate_semantic_map(h);
  ClassCounts counts;
  for (Index i = 0; i < h.size(); ++i) ++counts.n[h.data()[i]];
  return counts;
}

}  // namespace cellseg
