#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace jetholo {

/// Symmetric multi-index over base coordinates, stored sorted ascending (0-based indices).
/// (0, 0, 1) stands for d^3 / dx^0 dx^0 dx^1.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> indices);

  std::size_t order() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  int operator[](std::size_t i) const { return idx_[i]; }
  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }
  std::span<const int> indices() const { return idx_; }

  /// Number of occurrences of base index i.
  int count(int i) const;

  /// Sorted union with {i}.
  MultiIndex append(int i) const;

  /// Graded (by order) then lexicographic.
  friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b);
  friend bool operator==(const MultiIndex& a, const MultiIndex& b) = default;

 private:
  std::vector<int> idx_;
};

/// Binomial coefficient C(n, k) as an integer.
long long binomial(int n, int k);

/// All multi-indices with |I| <= k over n_base coordinates, graded-lex order.
std::vector<MultiIndex> enumerate(int n_base, int k);

/// A sub-multiset J of I with its complement and the number of ways J occurs among the
/// positions of I (the Leibniz multiplicity).
struct SubsetTerm {
  MultiIndex sub;
  MultiIndex complement;
  long long multiplicity = 0;
};

/// All strict sub-multisets J of I (J != I, including the empty one), each with its complement
/// and multiplicity, ordered by J in graded-lex order. Multiplicities are obtained by counting the
/// position subsets of I that realise J, i.e. by unfolding the iterated Leibniz rule.
std::vector<SubsetTerm> strict_subsets(const MultiIndex& index);

/// Coordinate layout of a k-th order jet bundle of a trivial bundle with the given base and fibre
/// coordinate names.
///
/// Fibre jet coordinates f^a_I, |I| <= k, are ordered by |I|, then by fibre index a, then by I
/// lexicographically. The jet coordinate named `<fibre>_<base...>` (e.g. f_xy) denotes f^a_I;
/// order-0 coordinates keep the fibre name.
class JetLayout {
 public:
  struct Entry {
    int fibre = 0;
    MultiIndex index;
  };

  JetLayout(std::vector<std::string> base_names, std::vector<std::string> fibre_names, int order);

  int n_base() const { return static_cast<int>(base_names_.size()); }
  int n_fibre() const { return static_cast<int>(fibre_names_.size()); }
  int order() const { return order_; }
  /// Number of fibre jet coordinates: n_fibre * C(n_base + k, k).
  int fibre_dim() const { return static_cast<int>(entries_.size()); }
  /// Fibre jet coordinates of order <= l (a prefix of the layout).
  int fibre_dim_up_to(int l) const;

  const std::vector<std::string>& base_names() const { return base_names_; }
  const std::vector<std::string>& fibre_names() const { return fibre_names_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::string>& jet_names() const { return jet_names_; }
  /// Base names followed by jet names.
  std::vector<std::string> all_names() const;

  /// Position of f^a_I in the fibre jet coordinates; -1 when |I| > k.
  int index_of(int fibre, const MultiIndex& index) const;
  /// Position of the named jet coordinate, -1 if not a jet coordinate.
  int index_of(const std::string& name) const;

  std::string name(int fibre, const MultiIndex& index) const;

  /// The same coordinate system truncated to order l <= k.
  JetLayout truncated(int l) const;

 private:
  std::vector<std::string> base_names_;
  std::vector<std::string> fibre_names_;
  int order_ = 0;
  std::vector<Entry> entries_;
  std::vector<std::string> jet_names_;
  std::map<std::string, int, std::less<>> by_name_;
};

}  // namespace jetholo
