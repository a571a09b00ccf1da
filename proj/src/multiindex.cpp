#include "jetholo/multiindex.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "jetholo/errors.hpp"

namespace jetholo {

MultiIndex::MultiIndex(std::vector<int> indices) : idx_(std::move(indices)) {
  std::sort(idx_.begin(), idx_.end());
}

int MultiIndex::count(int i) const {
  return static_cast<int>(std::count(idx_.begin(), idx_.end(), i));
}

MultiIndex MultiIndex::append(int i) const {
  MultiIndex out;
  out.idx_.reserve(idx_.size() + 1);
  out.idx_ = idx_;
  out.idx_.insert(std::upper_bound(out.idx_.begin(), out.idx_.end(), i), i);
  return out;
}

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) {
  if (auto c = a.idx_.size() <=> b.idx_.size(); c != 0) return c;
  return std::lexicographical_compare_three_way(a.idx_.begin(), a.idx_.end(), b.idx_.begin(),
                                                b.idx_.end());
}

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<MultiIndex> enumerate(int n_base, int k) {
  if (n_base < 1) throw InvalidArgument("enumerate: n_base must be >= 1");
  if (k < 0) throw InvalidArgument("enumerate: order must be >= 0");
  std::vector<MultiIndex> out;
  std::vector<int> current;
  // combinations with repetition of each size, in lexicographic order
  std::function<void(int, int)> rec = [&](int remaining, int lowest) {
    if (remaining == 0) {
      out.emplace_back(current);
      return;
    }
    for (int i = lowest; i < n_base; ++i) {
      current.push_back(i);
      rec(remaining - 1, i);
      current.pop_back();
    }
  };
  for (int order = 0; order <= k; ++order) rec(order, 0);
  return out;
}

std::vector<SubsetTerm> strict_subsets(const MultiIndex& index) {
  const std::size_t n = index.order();
  if (n > 20) throw InvalidArgument("strict_subsets: multi-index too long");
  std::map<MultiIndex, SubsetTerm> terms;
  const unsigned long full = (1UL << n) - 1;
  for (unsigned long mask = 0; mask < full; ++mask) {
    std::vector<int> sub, rest;
    for (std::size_t p = 0; p < n; ++p) {
      if (mask & (1UL << p)) sub.push_back(index[p]);
      else rest.push_back(index[p]);
    }
    MultiIndex j(sub);
    auto it = terms.find(j);
    if (it == terms.end()) {
      terms.emplace(j, SubsetTerm{j, MultiIndex(rest), 1});
    } else {
      ++it->second.multiplicity;
    }
  }
  std::vector<SubsetTerm> out;
  out.reserve(terms.size());
  for (auto& [_, t] : terms) out.push_back(std::move(t));
  return out;
}

JetLayout::JetLayout(std::vector<std::string> base_names, std::vector<std::string> fibre_names,
                     int order)
    : base_names_(std::move(base_names)), fibre_names_(std::move(fibre_names)), order_(order) {
  if (base_names_.empty()) throw InvalidArgument("JetLayout: at least one base coordinate required");
  if (fibre_names_.empty()) throw InvalidArgument("JetLayout: at least one fibre coordinate required");
  if (order_ < 0) throw InvalidArgument("JetLayout: order must be >= 0");
  const auto indices = enumerate(n_base(), order_);
  for (int r = 0; r <= order_; ++r) {
    for (int a = 0; a < n_fibre(); ++a) {
      for (const auto& idx : indices) {
        if (static_cast<int>(idx.order()) != r) continue;
        entries_.push_back({a, idx});
      }
    }
  }
  std::set<std::string> reserved(base_names_.begin(), base_names_.end());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::string nm = name(entries_[i].fibre, entries_[i].index);
    if (reserved.count(nm) || !by_name_.emplace(nm, static_cast<int>(i)).second)
      throw InvalidArgument("JetLayout: jet coordinate name '" + nm + "' is ambiguous");
    jet_names_.push_back(std::move(nm));
  }
}

int JetLayout::fibre_dim_up_to(int l) const {
  return n_fibre() * static_cast<int>(binomial(n_base() + l, l));
}

std::vector<std::string> JetLayout::all_names() const {
  std::vector<std::string> out = base_names_;
  out.insert(out.end(), jet_names_.begin(), jet_names_.end());
  return out;
}

int JetLayout::index_of(int fibre, const MultiIndex& index) const {
  if (static_cast<int>(index.order()) > order_) return -1;
  // Offset of the order block, then fibre block, then rank of I among indices of that order.
  const int r = static_cast<int>(index.order());
  int offset = r == 0 ? 0 : fibre_dim_up_to(r - 1);
  const int per_fibre = static_cast<int>(binomial(n_base() + r - 1, r));
  offset += fibre * per_fibre;
  for (int i = offset; i < offset + per_fibre; ++i)
    if (entries_[i].index == index) return i;
  return -1;
}

int JetLayout::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

std::string JetLayout::name(int fibre, const MultiIndex& index) const {
  std::string out = fibre_names_.at(fibre);
  if (index.empty()) return out;
  out += '_';
  for (int i : index) out += base_names_.at(i);
  return out;
}

JetLayout JetLayout::truncated(int l) const {
  if (l > order_) throw InvalidArgument("JetLayout::truncated: cannot raise the order");
  return JetLayout(base_names_, fibre_names_, l);
}

}  // namespace jetholo
