#pragma once

// Ten canonical feature rows shared by the dataset round-trip tests and the
// acceptance suite.  MR_R alone separates the two labels in this set.

#include "gazeforge/gazefeat.hpp"

namespace gftest {

inline gazeforge::GazeDataset reference_rows() {
  using gazeforge::Label;
  gazeforge::GazeDataset ds;
  ds.source = "reference";
  auto add = [&](double a, double b, double c, double d, double e, double f, double g, double h,
                 Label label) {
    gazeforge::FeatureVector v;
    v.values = {a, b, c, d, e, f, g, h};
    v.label = label;
    ds.rows.push_back(v);
  };
  add(37, 45, 2, 1, 3.115, 2.272, 2.385, 2.04, Label::TEXT);
  add(363, 392, 7, 3, 11.274, 8.318, 0.227, 0.374, Label::IMAGE);
  add(119, 113, 5, 6, 23.462, 26.857, 1.066, 0.758, Label::IMAGE);
  add(17, 30, 2, 2, 2.175, 2.635, 1.894, 2.147, Label::TEXT);
  add(13, 29, 2, 1, 2.102, 1.937, 1.68, 2.157, Label::TEXT);
  add(478, 485, 9, 12, 10.23, 15.69, 0.221, 0.361, Label::IMAGE);
  add(111, 107, 1, 1, 9.781, 8.271, 0.993, 0.887, Label::IMAGE);
  add(413, 421, 4, 4, 12.974, 11.883, 0.653, 0.652, Label::IMAGE);
  add(221, 241, 4, 2, 5.456, 5.287, 1.112, 1.037, Label::TEXT);
  add(521, 518, 15, 13, 18.641, 14.391, 0.576, 0.489, Label::IMAGE);
  return ds;
}

}  // namespace gftest
