#include "entlab/group.hpp"

#include <algorithm>
#include <set>

namespace entlab {

FiniteGroup::FiniteGroup(Eigen::MatrixXi table, int identity)
    : table_(std::move(table)), identity_(identity) {
  const int n = static_cast<int>(table_.rows());
  if (n <= 0 || table_.cols() != n) {
    throw GroupError("group table must be a nonempty square matrix");
  }
  if (identity_ < 0 || identity_ >= n) {
    throw GroupError("identity index out of range");
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int v = table_(a, b);
      if (v < 0 || v >= n) {
        throw GroupError("group table entry out of range at (" +
                         std::to_string(a) + "," + std::to_string(b) + ")");
      }
    }
  }
  // Latin-square check: every row and column is a permutation.
  for (int a = 0; a < n; ++a) {
    std::vector<bool> row(static_cast<size_t>(n), false);
    std::vector<bool> col(static_cast<size_t>(n), false);
    for (int b = 0; b < n; ++b) {
      if (row[static_cast<size_t>(table_(a, b))]) {
        throw GroupError("group table is not a Latin-square: duplicate in row " +
                         std::to_string(a));
      }
      row[static_cast<size_t>(table_(a, b))] = true;
      if (col[static_cast<size_t>(table_(b, a))]) {
        throw GroupError(
            "group table is not a Latin-square: duplicate in column " +
            std::to_string(a));
      }
      col[static_cast<size_t>(table_(b, a))] = true;
    }
  }
  for (int a = 0; a < n; ++a) {
    if (table_(identity_, a) != a || table_(a, identity_) != a) {
      throw GroupError("declared identity does not act as identity on element " +
                       std::to_string(a));
    }
  }
  // Exhaustive associativity check, O(n^3).
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        if (table_(table_(a, b), c) != table_(a, table_(b, c))) {
          throw GroupError("group table fails associativity at (" +
                           std::to_string(a) + "," + std::to_string(b) + "," +
                           std::to_string(c) + ")");
        }
      }
    }
  }
  inverse_.assign(static_cast<size_t>(n), -1);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (table_(a, b) == identity_ && table_(b, a) == identity_) {
        inverse_[static_cast<size_t>(a)] = b;
        break;
      }
    }
    if (inverse_[static_cast<size_t>(a)] < 0) {
      throw GroupError("element " + std::to_string(a) + " has no inverse");
    }
  }
}

FiniteGroup FiniteGroup::cyclic(int n) {
  if (n <= 0) throw GroupError("cyclic group order must be positive");
  Eigen::MatrixXi t(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) t(a, b) = (a + b) % n;
  }
  return FiniteGroup(std::move(t), 0);
}

FiniteGroup FiniteGroup::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("order") || !j.contains("mul") ||
      !j.contains("identity")) {
    throw GroupError("group document must have fields order, mul, identity");
  }
  const int n = j.at("order").get<int>();
  if (n <= 0) throw GroupError("group order must be positive");
  const auto& mul = j.at("mul");
  if (!mul.is_array() || static_cast<int>(mul.size()) != n) {
    throw GroupError("mul must be an order x order array");
  }
  Eigen::MatrixXi t(n, n);
  for (int a = 0; a < n; ++a) {
    const auto& row = mul.at(static_cast<size_t>(a));
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw GroupError("mul must be an order x order array");
    }
    for (int b = 0; b < n; ++b) {
      t(a, b) = row.at(static_cast<size_t>(b)).get<int>();
    }
  }
  return FiniteGroup(std::move(t), j.at("identity").get<int>());
}

CosetStructure coset_structure(const FiniteGroup& G, std::vector<int> subgroup) {
  const int n = G.order();
  std::sort(subgroup.begin(), subgroup.end());
  subgroup.erase(std::unique(subgroup.begin(), subgroup.end()), subgroup.end());
  if (subgroup.empty()) throw GroupError("subgroup must be nonempty");
  std::set<int> H(subgroup.begin(), subgroup.end());
  for (int h : subgroup) {
    if (h < 0 || h >= n) throw GroupError("subgroup element out of range");
  }
  if (H.count(G.identity()) == 0) {
    throw GroupError("not a subgroup: missing identity");
  }
  for (int a : subgroup) {
    if (H.count(G.inverse(a)) == 0) {
      throw GroupError("not a subgroup: not closed under inverse");
    }
    for (int b : subgroup) {
      if (H.count(G.op(a, b)) == 0) {
        throw GroupError("not a subgroup: not closed under composition");
      }
    }
  }

  // Left cosets gH, ordered by smallest member; section defaults to that member.
  std::vector<int> coset_of(static_cast<size_t>(n), -1);
  std::vector<std::vector<int>> cosets;
  std::vector<int> section;
  for (int g = 0; g < n; ++g) {
    if (coset_of[static_cast<size_t>(g)] >= 0) continue;
    std::vector<int> coset;
    for (int h : subgroup) coset.push_back(G.op(g, h));
    std::sort(coset.begin(), coset.end());
    const int idx = static_cast<int>(cosets.size());
    for (int e : coset) {
      if (coset_of[static_cast<size_t>(e)] >= 0) {
        throw GroupError("cosets do not partition the group");
      }
      coset_of[static_cast<size_t>(e)] = idx;
    }
    section.push_back(coset.front());
    cosets.push_back(std::move(coset));
  }
  const int q = static_cast<int>(cosets.size());

  // Quotient table; well defined only when H is normal, which we check
  // exhaustively: the product coset must not depend on the representatives.
  Eigen::MatrixXi qt(q, q);
  for (int a = 0; a < q; ++a) {
    for (int b = 0; b < q; ++b) {
      int expected = -1;
      for (int x : cosets[static_cast<size_t>(a)]) {
        for (int y : cosets[static_cast<size_t>(b)]) {
          const int c = coset_of[static_cast<size_t>(G.op(x, y))];
          if (expected < 0) {
            expected = c;
          } else if (c != expected) {
            throw GroupError(
                "subgroup is not normal: quotient table inconsistent across "
                "representatives");
          }
        }
      }
      qt(a, b) = expected;
    }
  }
  FiniteGroup quotient(std::move(qt), coset_of[static_cast<size_t>(G.identity())]);
  return CosetStructure{std::move(subgroup), std::move(cosets),
                        std::move(section), std::move(coset_of),
                        std::move(quotient)};
}

}  // namespace entlab
