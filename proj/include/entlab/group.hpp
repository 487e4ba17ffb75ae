#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include <json.hpp>

#include "entlab/error.hpp"

namespace entlab {

/// A finite group given by its composition table over element indices.
/// Construction checks that the table is a Latin square, that composition
/// is associative, and that the declared identity works and every element
/// has an inverse; a bad table throws GroupError.
class FiniteGroup {
 public:
  FiniteGroup(Eigen::MatrixXi table, int identity);

  /// Z/n with addition mod n.
  static FiniteGroup cyclic(int n);

  /// Parses {"order": n, "mul": [[...]], "identity": i}.
  static FiniteGroup from_json(const nlohmann::json& j);

  int order() const { return static_cast<int>(table_.rows()); }
  int identity() const { return identity_; }
  int op(int a, int b) const { return table_(a, b); }
  int inverse(int a) const { return inverse_[static_cast<size_t>(a)]; }
  const Eigen::MatrixXi& table() const { return table_; }

  bool operator==(const FiniteGroup& other) const {
    return identity_ == other.identity_ && table_ == other.table_;
  }

 private:
  Eigen::MatrixXi table_;
  int identity_ = 0;
  std::vector<int> inverse_;
};

/// Left cosets of a normal subgroup together with the quotient group.
struct CosetStructure {
  std::vector<int> subgroup;              // sorted element indices of H
  std::vector<std::vector<int>> cosets;   // partition of G, each sorted
  std::vector<int> section;               // one representative per coset
  std::vector<int> coset_of;              // element index -> coset index
  FiniteGroup quotient;
};

/// Partitions G into left cosets of `subgroup` and builds the quotient
/// table. Throws GroupError if the subset is not a subgroup, or if the
/// quotient table is inconsistent across representatives (H not normal);
/// the normality check is exhaustive over all representative pairs.
CosetStructure coset_structure(const FiniteGroup& G, std::vector<int> subgroup);

}  // namespace entlab
