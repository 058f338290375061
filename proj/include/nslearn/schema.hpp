#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nslearn/digest.hpp"

namespace nsl {

class SchemaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// The abducible space: an ordered list of finite-domain slot variables.
// Every complete assignment binds each slot to exactly one domain value,
// so the k = sum(|domain|) Boolean literals are grouped one-of-n per slot.
class SlotSchema {
public:
  struct Slot {
    std::string name;
    std::vector<std::string> values;
  };

  SlotSchema() = default;
  explicit SlotSchema(std::vector<Slot> slots) : slots_(std::move(slots)) {
    rebuild_index();
  }

  void add_slot(std::string name, std::vector<std::string> values) {
    slots_.push_back({std::move(name), std::move(values)});
    rebuild_index();
  }

  const std::vector<Slot>& slots() const { return slots_; }
  std::size_t slot_count() const { return slots_.size(); }
  const Slot& slot(std::size_t i) const { return slots_.at(i); }

  int slot_index(std::string_view name) const {
    auto it = slot_by_name_.find(std::string(name));
    return it == slot_by_name_.end() ? -1 : it->second;
  }

  int value_index(std::size_t slot, std::string_view value) const {
    const auto& vs = slots_.at(slot).values;
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i] == value) return static_cast<int>(i);
    return -1;
  }

  // Global index of the Boolean literal (slot = value).
  std::size_t literal_index(std::size_t slot, std::size_t value) const {
    return offsets_.at(slot) + value;
  }
  std::size_t literal_offset(std::size_t slot) const { return offsets_.at(slot); }
  std::size_t literal_count() const { return total_literals_; }

  std::uint64_t digest() const {
    Fnv64 h;
    for (const auto& s : slots_) {
      h.str(s.name);
      for (const auto& v : s.values) h.str(v);
      h.sep();
    }
    return h.value();
  }

  // Throws SchemaError on duplicate slot ids, empty domains, or duplicate
  // values within a domain.
  void validate() const {
    std::unordered_map<std::string, int> seen;
    for (const auto& s : slots_) {
      if (!seen.emplace(s.name, 1).second)
        throw SchemaError("duplicate slot id: " + s.name);
      if (s.values.empty())
        throw SchemaError("slot " + s.name + " has an empty domain");
      std::unordered_map<std::string, int> vals;
      for (const auto& v : s.values)
        if (!vals.emplace(v, 1).second)
          throw SchemaError("slot " + s.name + " repeats value " + v);
    }
  }

private:
  void rebuild_index() {
    slot_by_name_.clear();
    offsets_.assign(slots_.size(), 0);
    total_literals_ = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      slot_by_name_[slots_[i].name] = static_cast<int>(i);
      offsets_[i] = total_literals_;
      total_literals_ += slots_[i].values.size();
    }
  }

  std::vector<Slot> slots_;
  std::unordered_map<std::string, int> slot_by_name_;
  std::vector<std::size_t> offsets_;
  std::size_t total_literals_ = 0;
};

inline constexpr std::int16_t kUnbound = -1;

// A (possibly partial) valuation of the schema's slots; values are domain
// indices, kUnbound marks free slots.
class Assignment {
public:
  Assignment() = default;
  explicit Assignment(std::size_t slot_count)
      : values_(slot_count, kUnbound) {}
  explicit Assignment(std::vector<std::int16_t> values)
      : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  bool bound(std::size_t slot) const { return values_[slot] != kUnbound; }
  std::int16_t value(std::size_t slot) const { return values_[slot]; }
  void bind(std::size_t slot, std::int16_t value) { values_[slot] = value; }
  void unbind(std::size_t slot) { values_[slot] = kUnbound; }

  bool complete() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](std::int16_t v) { return v != kUnbound; });
  }
  std::size_t bound_count() const {
    std::size_t n = 0;
    for (auto v : values_) n += (v != kUnbound);
    return n;
  }

  const std::vector<std::int16_t>& values() const { return values_; }

  std::uint64_t digest() const {
    Fnv64 h;
    for (auto v : values_) h.i64(v);
    return h.value();
  }

  friend bool operator==(const Assignment& a, const Assignment& b) {
    return a.values_ == b.values_;
  }
  friend bool operator!=(const Assignment& a, const Assignment& b) {
    return !(a == b);
  }
  // Lexicographic in slot order then domain order; unbound sorts first.
  friend bool operator<(const Assignment& a, const Assignment& b) {
    return a.values_ < b.values_;
  }

private:
  std::vector<std::int16_t> values_;
};

// Hamming distance over bound-in-both slots plus mismatch on boundness.
inline std::size_t mismatch_count(const Assignment& a, const Assignment& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a.value(i) != b.value(i));
  return n;
}

// A deduction result: either a subset of the outcome atoms (by id) or the
// distinguished integrity-violation marker.
struct Outcome {
  bool violation = false;
  std::vector<std::uint32_t> atoms;  // sorted, deduplicated

  static Outcome bottom() { return Outcome{true, {}}; }
  static Outcome of(std::vector<std::uint32_t> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return Outcome{false, std::move(ids)};
  }
  bool empty() const { return !violation && atoms.empty(); }

  std::uint64_t digest() const {
    Fnv64 h;
    h.u64(violation ? 1 : 0);
    for (auto a : atoms) h.u64(a);
    return h.value();
  }

  friend bool operator==(const Outcome& a, const Outcome& b) {
    if (a.violation != b.violation) return false;
    if (a.violation) return true;
    return a.atoms == b.atoms;
  }
  friend bool operator!=(const Outcome& a, const Outcome& b) {
    return !(a == b);
  }
};

}  // namespace nsl
