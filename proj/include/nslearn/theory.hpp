#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nslearn/digest.hpp"
#include "nslearn/schema.hpp"

namespace nsl {

enum class IcStatus { consistent, violated };

// Per-sample ground facts bound to a theory (the x-bar extension). Built once
// per query so deduction inside a search loop pays no parsing cost.
class FactContext {
public:
  virtual ~FactContext() = default;
  std::uint64_t digest() const { return digest_; }

protected:
  std::uint64_t digest_ = 0;
};

inline std::uint64_t fact_strings_digest(std::vector<std::string> facts) {
  std::sort(facts.begin(), facts.end());
  Fnv64 h;
  for (const auto& f : facts) h.str(f);
  return h.value();
}

// The symbolic side of the architecture. A module owns a slot schema and an
// outcome vocabulary and exposes deduction; integrity checking on partial
// assignments is an optional pruning hook, as is target-aware pruning for
// procedural theories.
class SymbolicModule {
public:
  virtual ~SymbolicModule() = default;

  virtual const SlotSchema& schema() const = 0;
  virtual const std::vector<std::string>& outcome_names() const = 0;
  virtual std::uint64_t digest() const = 0;

  virtual std::shared_ptr<const FactContext> bind_facts(
      const std::vector<std::string>& facts) const = 0;

  // Requires a complete assignment; returns the outcome atoms entailed by the
  // least model, or the violation marker.
  virtual Outcome deduce(const Assignment& a,
                         const FactContext* facts = nullptr) const = 0;

  // May be called on partial assignments. Must never report `violated` for a
  // partial assignment that extends to a consistent complete one.
  virtual IcStatus check_ics(const Assignment& /*partial*/,
                             const FactContext* /*facts*/ = nullptr) const {
    return IcStatus::consistent;
  }

  // Optional: return true when no completion of `partial` can deduce exactly
  // `target`. Used by abduction search; must be sound (never cut a proof).
  virtual bool prune_target(const Assignment& /*partial*/,
                            const FactContext* /*facts*/,
                            const Outcome& /*target*/) const {
    return false;
  }

  int outcome_id(std::string_view name) const {
    const auto& names = outcome_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }

  Outcome make_outcome(const std::vector<std::string>& names) const {
    std::vector<std::uint32_t> ids;
    ids.reserve(names.size());
    for (const auto& n : names) {
      int id = outcome_id(n);
      if (id < 0) throw std::invalid_argument("unknown outcome atom: " + n);
      ids.push_back(static_cast<std::uint32_t>(id));
    }
    return Outcome::of(std::move(ids));
  }

  std::string outcome_to_string(const Outcome& o) const {
    if (o.violation) return "⊥";
    if (o.atoms.empty()) return "{}";
    std::string s;
    for (std::size_t i = 0; i < o.atoms.size(); ++i) {
      if (i) s += ",";
      s += outcome_names().at(o.atoms[i]);
    }
    return s;
  }
};

// ---------------------------------------------------------------------------
// Ground theories (declarative path)
// ---------------------------------------------------------------------------

// Atom ids: [0, k) are the abducible literals in schema literal order;
// external and derived atoms follow. Outcome atoms are derived atoms that
// additionally carry an outcome index.
enum class AtomKind : std::uint8_t { abducible, external, derived };

struct GroundRule {
  std::uint32_t head;
  std::vector<std::uint32_t> pos;
  std::vector<std::uint32_t> neg;
};

struct GroundClause {
  std::vector<std::uint32_t> pos;
  std::vector<std::uint32_t> neg;
  bool partial_checkable = false;  // only abducible/external literals
};

struct Stratum {
  std::vector<GroundRule> rules;
  bool recursive = false;
};

struct GroundTheoryData {
  SlotSchema schema;
  std::vector<std::string> outcome_names;
  // Atom table for ids >= k (externals and deriveds), in id order.
  std::vector<std::string> atom_names;
  std::vector<AtomKind> atom_kinds;  // aligned with atom_names
  std::vector<Stratum> strata;
  std::vector<GroundClause> ics;
  // outcome index -> atom id (or -1 when the outcome atom never occurs).
  std::vector<std::int64_t> outcome_atom_ids;
  std::size_t ground_rule_count = 0;
  std::size_t dropped_unsat = 0;
};

class DeclarativeFactContext final : public FactContext {
public:
  DeclarativeFactContext(std::vector<std::uint32_t> ids, std::uint64_t digest)
      : ids_(std::move(ids)) {
    digest_ = digest;
  }
  const std::vector<std::uint32_t>& atom_ids() const { return ids_; }

private:
  std::vector<std::uint32_t> ids_;
};

class GroundTheory final : public SymbolicModule {
public:
  explicit GroundTheory(GroundTheoryData data) : d_(std::move(data)) {
    k_ = d_.schema.literal_count();
    atom_count_ = k_ + d_.atom_names.size();
    slot_of_literal_.resize(k_);
    value_of_literal_.resize(k_);
    for (std::size_t s = 0; s < d_.schema.slot_count(); ++s)
      for (std::size_t v = 0; v < d_.schema.slot(s).values.size(); ++v) {
        slot_of_literal_[d_.schema.literal_index(s, v)] =
            static_cast<std::uint32_t>(s);
        value_of_literal_[d_.schema.literal_index(s, v)] =
            static_cast<std::uint32_t>(v);
      }
    for (const auto& [name, id] : external_index_build()) external_index_[name] = id;
    digest_ = compute_digest();
  }

  const SlotSchema& schema() const override { return d_.schema; }
  const std::vector<std::string>& outcome_names() const override {
    return d_.outcome_names;
  }
  std::uint64_t digest() const override { return digest_; }

  const GroundTheoryData& data() const { return d_; }
  std::size_t atom_count() const { return atom_count_; }
  std::size_t abducible_count() const { return k_; }
  std::uint32_t literal_slot(std::uint32_t id) const { return slot_of_literal_[id]; }
  std::uint32_t literal_value(std::uint32_t id) const { return value_of_literal_[id]; }
  AtomKind atom_kind(std::uint32_t id) const {
    return id < k_ ? AtomKind::abducible : d_.atom_kinds[id - k_];
  }
  std::string atom_name(std::uint32_t id) const {
    if (id < k_) {
      const auto& sl = d_.schema.slot(slot_of_literal_[id]);
      return "val(" + sl.name + "," + sl.values[value_of_literal_[id]] + ")";
    }
    return d_.atom_names[id - k_];
  }

  std::shared_ptr<const FactContext> bind_facts(
      const std::vector<std::string>& facts) const override {
    std::vector<std::uint32_t> ids;
    for (const auto& f : facts) {
      auto it = external_index_.find(canonical_atom_text(f));
      if (it != external_index_.end()) ids.push_back(it->second);
      // Facts naming atoms the ground theory never inspects are inert.
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return std::make_shared<DeclarativeFactContext>(std::move(ids),
                                                    fact_strings_digest(facts));
  }

  Outcome deduce(const Assignment& a,
                 const FactContext* facts = nullptr) const override {
    if (a.size() != d_.schema.slot_count() || !a.complete())
      throw std::invalid_argument("deduce requires a complete assignment");
    thread_local std::vector<std::uint8_t> truth;
    truth.assign(atom_count_, 0);
    seed_edb(a, facts, truth);
    for (const auto& st : d_.strata) {
      if (!st.recursive) {
        for (const auto& r : st.rules)
          if (rule_fires(r, truth)) truth[r.head] = 1;
      } else {
        bool changed = true;
        while (changed) {
          changed = false;
          for (const auto& r : st.rules)
            if (!truth[r.head] && rule_fires(r, truth)) {
              truth[r.head] = 1;
              changed = true;
            }
        }
      }
    }
    for (const auto& c : d_.ics)
      if (clause_holds(c, truth)) return Outcome::bottom();
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < d_.outcome_atom_ids.size(); ++i) {
      auto id = d_.outcome_atom_ids[i];
      if (id >= 0 && truth[static_cast<std::size_t>(id)])
        out.push_back(static_cast<std::uint32_t>(i));
    }
    return Outcome::of(std::move(out));
  }

  IcStatus check_ics(const Assignment& partial,
                     const FactContext* facts = nullptr) const override {
    const auto* fc = static_cast<const DeclarativeFactContext*>(facts);
    for (const auto& c : d_.ics) {
      if (!c.partial_checkable) continue;
      bool all_true = true;
      for (auto id : c.pos) {
        int tv = edb_truth(id, partial, fc);
        if (tv != 1) {
          all_true = false;
          break;
        }
      }
      if (!all_true) continue;
      for (auto id : c.neg) {
        int tv = edb_truth(id, partial, fc);
        if (tv != 0) {
          all_true = false;
          break;
        }
      }
      if (all_true) return IcStatus::violated;
    }
    return IcStatus::consistent;
  }

  // Strips whitespace so "p(a, b)" and "p(a,b)" name the same fact.
  static std::string canonical_atom_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
      if (c != ' ' && c != '\t') out.push_back(c);
    return out;
  }

private:
  std::vector<std::pair<std::string, std::uint32_t>> external_index_build() const {
    std::vector<std::pair<std::string, std::uint32_t>> v;
    for (std::size_t i = 0; i < d_.atom_names.size(); ++i)
      if (d_.atom_kinds[i] == AtomKind::external)
        v.emplace_back(canonical_atom_text(d_.atom_names[i]),
                       static_cast<std::uint32_t>(k_ + i));
    return v;
  }

  void seed_edb(const Assignment& a, const FactContext* facts,
                std::vector<std::uint8_t>& truth) const {
    for (std::size_t s = 0; s < d_.schema.slot_count(); ++s)
      truth[d_.schema.literal_index(s, static_cast<std::size_t>(a.value(s)))] = 1;
    if (facts != nullptr) {
      const auto* fc = static_cast<const DeclarativeFactContext*>(facts);
      for (auto id : fc->atom_ids()) truth[id] = 1;
    }
  }

  static bool rule_fires(const GroundRule& r,
                         const std::vector<std::uint8_t>& truth) {
    for (auto id : r.pos)
      if (!truth[id]) return false;
    for (auto id : r.neg)
      if (truth[id]) return false;
    return true;
  }

  static bool clause_holds(const GroundClause& c,
                           const std::vector<std::uint8_t>& truth) {
    for (auto id : c.pos)
      if (!truth[id]) return false;
    for (auto id : c.neg)
      if (truth[id]) return false;
    return true;
  }

  // Three-valued truth of an EDB atom under a partial assignment:
  // 1 true, 0 false, -1 unknown.
  int edb_truth(std::uint32_t id, const Assignment& partial,
                const DeclarativeFactContext* fc) const {
    if (id < k_) {
      auto slot = slot_of_literal_[id];
      if (!partial.bound(slot)) return -1;
      return partial.value(slot) == static_cast<std::int16_t>(value_of_literal_[id])
                 ? 1
                 : 0;
    }
    if (fc == nullptr) return 0;
    const auto& ids = fc->atom_ids();
    return std::binary_search(ids.begin(), ids.end(), id) ? 1 : 0;
  }

  std::uint64_t compute_digest() const {
    Fnv64 h;
    h.u64(d_.schema.digest());
    for (const auto& n : d_.outcome_names) h.str(n);
    h.sep();
    for (const auto& n : d_.atom_names) h.str(n);
    h.sep();
    for (const auto& st : d_.strata) {
      h.u64(st.recursive ? 1 : 0);
      for (const auto& r : st.rules) {
        h.u64(r.head);
        for (auto id : r.pos) h.u64(id);
        h.sep();
        for (auto id : r.neg) h.u64(id);
        h.sep();
      }
      h.sep();
    }
    for (const auto& c : d_.ics) {
      for (auto id : c.pos) h.u64(id);
      h.sep();
      for (auto id : c.neg) h.u64(id);
      h.sep();
    }
    return h.value();
  }

  GroundTheoryData d_;
  std::size_t k_ = 0;
  std::size_t atom_count_ = 0;
  std::vector<std::uint32_t> slot_of_literal_;
  std::vector<std::uint32_t> value_of_literal_;
  std::unordered_map<std::string, std::uint32_t> external_index_;
  std::uint64_t digest_ = 0;
};

}  // namespace nsl
