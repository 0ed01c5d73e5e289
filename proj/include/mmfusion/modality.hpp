#pragma once

#include <cstddef>
#include <vector>

#include "mmfusion/matrix.hpp"

namespace mmfusion {

/// Per-modality feature widths (textual, acoustic, visual).
struct ModalityDims {
  std::size_t text = 0;
  std::size_t audio = 0;
  std::size_t visual = 0;

  std::size_t total() const { return text + audio + visual; }
  bool operator==(const ModalityDims&) const = default;
};

/// One utterance's unimodal feature vectors.
struct ModalityFeatures {
  std::vector<double> text;
  std::vector<double> audio;
  std::vector<double> visual;

  ModalityDims dims() const { return {text.size(), audio.size(), visual.size()}; }
  bool operator==(const ModalityFeatures&) const = default;
};

/// F = f_t (+) f_a (+) f_v as a column, in textual, acoustic, visual order.
/// Throws ShapeError naming the first modality whose width disagrees.
Matrix concat_modalities(const ModalityFeatures& m, const ModalityDims& expected);

/// Stacks the concatenations of many utterances as columns of one batch.
Matrix concat_batch(const std::vector<const ModalityFeatures*>& items,
                    const ModalityDims& expected);

}  // namespace mmfusion
