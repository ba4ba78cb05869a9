#pragma once

#include <iosfwd>

#include <nlohmann/json.hpp>

#include "nlx/lattice.hpp"

namespace nlx {

// JSON layout:
//   {"T": .., "N": .., "d": .., "width": .., "steps": [[..], null, ..]}
// with one entry per step 0..N in node order; undefined steps are null.
nlohmann::json to_json(const AdaptedField& field);
/// Rebuilds the field on `tree`; the header must match the tree.
AdaptedField field_from_json(const nlohmann::json& doc, const TreePtr& tree);
/// Rebuilds the tree from the header as well.
AdaptedField field_from_json(const nlohmann::json& doc);

// Binary layout (little endian):
//   magic "NLXF", u32 version = 1, f64 T, u32 N, u32 d, u32 width,
//   then for each step 0..N: u8 defined, followed by the slice as f64 values
//   when defined.
void write_binary(std::ostream& out, const AdaptedField& field);
AdaptedField read_binary(std::istream& in, const TreePtr& tree);
AdaptedField read_binary(std::istream& in);

}  // namespace nlx
