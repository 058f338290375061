#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nslearn/parser.hpp"
#include "nslearn/theory.hpp"

namespace nsl {

class GroundError : public TheoryError {
public:
  using TheoryError::TheoryError;
};

struct GroundOptions {
  std::size_t max_ground_rules = 5'000'000;
};

namespace detail {

inline std::optional<long long> to_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (std::size_t j = i; j < s.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(s[j]))) return std::nullopt;
  return std::stoll(s);
}

class Grounder {
public:
  Grounder(const ParsedTheory& t, const GroundOptions& opts)
      : t_(t), opts_(opts) {}

  GroundTheoryData run() {
    out_.schema = t_.schema;
    out_.outcome_names = t_.outcomes;
    k_ = t_.schema.literal_count();

    classify_predicates();
    compute_sccs();

    for (const auto& scc : sccs_) ground_scc(scc);
    ground_ics();

    out_.outcome_atom_ids.assign(t_.outcomes.size(), -1);
    for (std::size_t i = 0; i < t_.outcomes.size(); ++i) {
      auto it = atom_ids_.find(t_.outcomes[i]);
      if (it != atom_ids_.end()) out_.outcome_atom_ids[i] = it->second;
    }
    out_.ground_rule_count = rule_count_;
    return std::move(out_);
  }

private:
  using Subst = std::map<std::string, std::string>;

  struct GroundAtomRef {
    std::string pred;
    std::vector<std::string> args;
  };

  void classify_predicates() {
    for (const auto& r : t_.rules)
      if (!r.is_ic) defined_.insert(r.head.pred);
    for (const auto& name : t_.outcomes) outcome_preds_.insert(name);
  }

  // SCCs of the defined-predicate dependency graph, dependencies first.
  void compute_sccs() {
    std::vector<std::string> preds(defined_.begin(), defined_.end());
    std::sort(preds.begin(), preds.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < preds.size(); ++i)
      index[preds[i]] = static_cast<int>(i);
    std::vector<std::vector<int>> adj(preds.size());
    for (const auto& r : t_.rules) {
      if (r.is_ic) continue;
      int h = index[r.head.pred];
      for (const auto& lit : r.body) {
        if (lit.kind != Literal::Kind::pos_atom &&
            lit.kind != Literal::Kind::neg_atom)
          continue;
        auto it = index.find(lit.atom.pred);
        if (it != index.end()) adj[h].push_back(it->second);
      }
    }
    // Iterative Tarjan.
    int n = static_cast<int>(preds.size());
    std::vector<int> idx(n, -1), low(n, 0), on(n, 0);
    std::vector<int> stck;
    int counter = 0;
    std::vector<std::vector<int>> comp_of;
    struct Frame {
      int v;
      std::size_t ei;
    };
    for (int root = 0; root < n; ++root) {
      if (idx[root] != -1) continue;
      std::vector<Frame> frames{{root, 0}};
      idx[root] = low[root] = counter++;
      stck.push_back(root);
      on[root] = 1;
      while (!frames.empty()) {
        auto& f = frames.back();
        if (f.ei < adj[f.v].size()) {
          int w = adj[f.v][f.ei++];
          if (idx[w] == -1) {
            idx[w] = low[w] = counter++;
            stck.push_back(w);
            on[w] = 1;
            frames.push_back({w, 0});
          } else if (on[w]) {
            low[f.v] = std::min(low[f.v], idx[w]);
          }
        } else {
          if (low[f.v] == idx[f.v]) {
            std::vector<int> comp;
            for (;;) {
              int w = stck.back();
              stck.pop_back();
              on[w] = 0;
              comp.push_back(w);
              if (w == f.v) break;
            }
            comp_of.push_back(std::move(comp));
          }
          int v = f.v;
          frames.pop_back();
          if (!frames.empty())
            low[frames.back().v] = std::min(low[frames.back().v], low[v]);
        }
      }
    }
    // Tarjan emits callees before callers, which is evaluation order here.
    for (const auto& comp : comp_of) {
      Scc scc;
      for (int v : comp) scc.preds.insert(preds[static_cast<std::size_t>(v)]);
      scc.recursive = comp.size() > 1;
      if (!scc.recursive) {
        const std::string& p = preds[static_cast<std::size_t>(comp[0])];
        for (int w : adj[comp[0]])
          if (preds[static_cast<std::size_t>(w)] == p) scc.recursive = true;
      }
      sccs_.push_back(std::move(scc));
    }
  }

  struct Scc {
    std::set<std::string> preds;
    bool recursive = false;
  };

  void ground_scc(const Scc& scc) {
    Stratum st;
    st.recursive = scc.recursive;
    std::vector<const Rule*> rules;
    for (const auto& r : t_.rules)
      if (!r.is_ic && scc.preds.count(r.head.pred)) rules.push_back(&r);

    std::size_t before;
    do {
      before = possible_total_;
      for (const Rule* r : rules) instantiate(*r, scc, &st, nullptr);
    } while (scc.recursive && possible_total_ != before);
    out_.strata.push_back(std::move(st));
  }

  void ground_ics() {
    for (const auto& r : t_.rules)
      if (r.is_ic) instantiate(r, Scc{}, nullptr, &out_.ics);
  }

  // ----- rule instantiation --------------------------------------------------

  void instantiate(const Rule& rule, const Scc& scc, Stratum* stratum,
                   std::vector<GroundClause>* ics) {
    Subst subst;
    std::vector<const Literal*> remaining;
    remaining.reserve(rule.body.size());
    for (const auto& lit : rule.body) remaining.push_back(&lit);
    Body body;
    expand(rule, scc, subst, remaining, body, stratum, ics);
  }

  struct Body {
    std::vector<std::uint32_t> pos;
    std::vector<std::uint32_t> neg;
  };

  void expand(const Rule& rule, const Scc& scc, Subst& subst,
              std::vector<const Literal*> remaining, Body body,
              Stratum* stratum, std::vector<GroundClause>* ics) {
    // Evaluate and emit every literal that is decidable under the current
    // substitution; loop because bindings unlock further literals.
    bool progress = true;
    while (progress && !remaining.empty()) {
      progress = false;
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        const Literal& lit = *remaining[i];
        Step step = try_resolve(lit, subst, body);
        if (step == Step::killed) return;
        if (step == Step::consumed) {
          remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
          progress = true;
          break;
        }
      }
    }
    if (remaining.empty()) {
      emit(rule, scc, subst, std::move(body), stratum, ics);
      return;
    }
    // Branch on the positive atom with the fewest unbound variables.
    int best = -1;
    std::size_t best_unbound = SIZE_MAX;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const Literal& lit = *remaining[i];
      if (lit.kind != Literal::Kind::pos_atom) continue;
      if (lit.atom.pred != "val" && !defined_.count(lit.atom.pred)) continue;
      std::size_t unbound = 0;
      for (const auto& a : lit.atom.args)
        if (a.kind == Term::Kind::variable && !subst.count(a.text)) ++unbound;
      if (unbound < best_unbound) {
        best_unbound = unbound;
        best = static_cast<int>(i);
      }
    }
    if (best < 0)
      throw GroundError("cannot bind variables in rule", rule.line, 0);
    const Literal& gen = *remaining[static_cast<std::size_t>(best)];
    auto rest = remaining;
    rest.erase(rest.begin() + best);
    if (gen.atom.pred == "val") {
      branch_val(rule, scc, gen, subst, rest, body, stratum, ics);
    } else {
      branch_defined(rule, scc, gen, subst, rest, body, stratum, ics);
    }
  }

  enum class Step { pending, consumed, killed };

  Step try_resolve(const Literal& lit, Subst& subst, Body& body) {
    switch (lit.kind) {
      case Literal::Kind::guard:
        return resolve_guard(lit, subst);
      case Literal::Kind::builtin:
        return resolve_builtin(lit, subst);
      case Literal::Kind::pos_atom:
      case Literal::Kind::neg_atom: {
        if (!all_bound(lit.atom, subst)) return Step::pending;
        return resolve_ground_atom(lit, subst, body);
      }
    }
    return Step::pending;
  }

  Step resolve_guard(const Literal& lit, Subst& subst) {
    auto l = ground_term(lit.lhs, subst);
    auto r = ground_term(lit.rhs, subst);
    if (lit.op == GuardOp::eq && l && !r && lit.rhs.kind == Term::Kind::variable) {
      subst[lit.rhs.text] = *l;
      return Step::consumed;
    }
    if (lit.op == GuardOp::eq && r && !l && lit.lhs.kind == Term::Kind::variable) {
      subst[lit.lhs.text] = *r;
      return Step::consumed;
    }
    if (!l || !r) return Step::pending;
    auto ln = to_number(*l), rn = to_number(*r);
    bool ok;
    switch (lit.op) {
      case GuardOp::eq:
        ok = (ln && rn) ? (*ln == *rn) : (*l == *r);
        break;
      case GuardOp::ne:
        ok = (ln && rn) ? (*ln != *rn) : (*l != *r);
        break;
      case GuardOp::lt:
        if (!ln || !rn) return Step::killed;  // ordering needs numbers
        ok = *ln < *rn;
        break;
      case GuardOp::le:
        if (!ln || !rn) return Step::killed;
        ok = *ln <= *rn;
        break;
      default:
        ok = false;
    }
    return ok ? Step::consumed : Step::killed;
  }

  Step resolve_builtin(const Literal& lit, Subst& subst) {
    const auto& a = lit.atom.args;
    std::optional<long long> v[3];
    for (int i = 0; i < 3; ++i) {
      auto g = ground_term(a[static_cast<std::size_t>(i)], subst);
      if (g) {
        v[i] = to_number(*g);
        if (!v[i]) return Step::killed;  // non-numeric argument
      }
    }
    auto bind = [&](int i, long long value) -> Step {
      const Term& t = a[static_cast<std::size_t>(i)];
      if (t.kind != Term::Kind::variable) return Step::pending;
      subst[t.text] = std::to_string(value);
      return Step::consumed;
    };
    if (lit.atom.pred == "sum") {  // v0 + v1 = v2
      if (v[0] && v[1] && v[2])
        return (*v[0] + *v[1] == *v[2]) ? Step::consumed : Step::killed;
      if (v[0] && v[1]) return bind(2, *v[0] + *v[1]);
      if (v[0] && v[2]) return bind(1, *v[2] - *v[0]);
      if (v[1] && v[2]) return bind(0, *v[2] - *v[1]);
      return Step::pending;
    }
    if (lit.atom.pred == "abs") {  // |v0 - v1| = v2
      if (v[0] && v[1]) {
        long long d = *v[0] - *v[1];
        if (d < 0) d = -d;
        if (v[2]) return (*v[2] == d) ? Step::consumed : Step::killed;
        return bind(2, d);
      }
      return Step::pending;
    }
    if (lit.atom.pred == "mod") {  // v0 mod v1 = v2
      if (v[0] && v[1]) {
        if (*v[1] == 0) return Step::killed;
        long long m = *v[0] % *v[1];
        if (m < 0) m += (*v[1] > 0 ? *v[1] : -*v[1]);
        if (v[2]) return (*v[2] == m) ? Step::consumed : Step::killed;
        return bind(2, m);
      }
      return Step::pending;
    }
    return Step::pending;
  }

  Step resolve_ground_atom(const Literal& lit, const Subst& subst, Body& body) {
    GroundAtomRef g;
    g.pred = lit.atom.pred;
    for (const auto& t : lit.atom.args) g.args.push_back(*ground_term(t, subst));
    bool positive = lit.kind == Literal::Kind::pos_atom;

    if (g.pred == "val") {
      int slot = t_.schema.slot_index(g.args[0]);
      if (slot < 0) return positive ? Step::killed : Step::consumed;
      int value = t_.schema.value_index(static_cast<std::size_t>(slot), g.args[1]);
      if (value < 0) return positive ? Step::killed : Step::consumed;
      auto id = static_cast<std::uint32_t>(t_.schema.literal_index(
          static_cast<std::size_t>(slot), static_cast<std::size_t>(value)));
      (positive ? body.pos : body.neg).push_back(id);
      return Step::consumed;
    }
    if (defined_.count(g.pred)) {
      auto it = atom_ids_.find(atom_text(g));
      if (it == atom_ids_.end()) {
        // Not derivable by any rule instance so far.
        return positive ? Step::killed : Step::consumed;
      }
      (positive ? body.pos : body.neg).push_back(it->second);
      return Step::consumed;
    }
    // External fact predicate.
    auto id = intern(g, AtomKind::external);
    (positive ? body.pos : body.neg).push_back(id);
    return Step::consumed;
  }

  void branch_val(const Rule& rule, const Scc& scc, const Literal& gen,
                  Subst& subst, const std::vector<const Literal*>& rest,
                  const Body& body, Stratum* stratum,
                  std::vector<GroundClause>* ics) {
    const Term& st = gen.atom.args[0];
    const Term& vt = gen.atom.args[1];
    auto sg = ground_term(st, subst);
    for (std::size_t s = 0; s < t_.schema.slot_count(); ++s) {
      const auto& slot = t_.schema.slot(s);
      if (sg && *sg != slot.name) continue;
      auto vg = ground_term(vt, subst);
      for (std::size_t v = 0; v < slot.values.size(); ++v) {
        if (vg && *vg != slot.values[v]) continue;
        Subst next = subst;
        if (!sg) next[st.text] = slot.name;
        if (!vg) next[vt.text] = slot.values[v];
        Body b = body;
        b.pos.push_back(
            static_cast<std::uint32_t>(t_.schema.literal_index(s, v)));
        expand(rule, scc, next, rest, std::move(b), stratum, ics);
      }
    }
  }

  void branch_defined(const Rule& rule, const Scc& scc, const Literal& gen,
                      Subst& subst, const std::vector<const Literal*>& rest,
                      const Body& body, Stratum* stratum,
                      std::vector<GroundClause>* ics) {
    auto it = possible_.find(gen.atom.pred);
    if (it == possible_.end()) return;
    // Snapshot by index: the vector may grow while we recurse (fixpoint
    // rounds re-run instantiation anyway).
    const auto& candidates = it->second;
    std::size_t n = candidates.size();
    for (std::size_t ci = 0; ci < n; ++ci) {
      const GroundAtomRef& cand = candidates[ci];
      if (cand.args.size() != gen.atom.args.size()) continue;
      Subst next = subst;
      bool ok = true;
      for (std::size_t i = 0; i < cand.args.size(); ++i) {
        const Term& t = gen.atom.args[i];
        if (t.kind == Term::Kind::variable) {
          auto found = next.find(t.text);
          if (found == next.end()) {
            next[t.text] = cand.args[i];
          } else if (found->second != cand.args[i]) {
            ok = false;
            break;
          }
        } else if (t.text != cand.args[i]) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      Body b = body;
      b.pos.push_back(atom_ids_.at(atom_text(cand)));
      expand(rule, scc, next, rest, std::move(b), stratum, ics);
    }
  }

  void emit(const Rule& rule, const Scc& scc, const Subst& subst, Body body,
            Stratum* stratum, std::vector<GroundClause>* ics) {
    std::sort(body.pos.begin(), body.pos.end());
    body.pos.erase(std::unique(body.pos.begin(), body.pos.end()),
                   body.pos.end());
    std::sort(body.neg.begin(), body.neg.end());
    body.neg.erase(std::unique(body.neg.begin(), body.neg.end()),
                   body.neg.end());
    // Unsatisfiable: a positive atom also required false, or two distinct
    // values demanded of one slot.
    for (auto id : body.pos)
      if (std::binary_search(body.neg.begin(), body.neg.end(), id)) {
        ++out_.dropped_unsat;
        return;
      }
    int last_slot = -1;
    for (auto id : body.pos) {
      if (id >= k_) break;
      int slot = slot_of(id);
      if (slot == last_slot) {
        ++out_.dropped_unsat;
        return;
      }
      last_slot = slot;
    }

    if (ics != nullptr) {
      GroundClause c;
      c.pos = std::move(body.pos);
      c.neg = std::move(body.neg);
      c.partial_checkable = true;
      for (auto id : c.pos) c.partial_checkable &= edb_atom(id);
      for (auto id : c.neg) c.partial_checkable &= edb_atom(id);
      if (!dedupe_clause(c)) return;
      bump_count(rule);
      ics->push_back(std::move(c));
      return;
    }

    GroundAtomRef head;
    head.pred = rule.head.pred;
    for (const auto& t : rule.head.args)
      head.args.push_back(*ground_term(t, subst));
    auto head_id = intern(head, AtomKind::derived);
    add_possible(head);

    GroundRule gr;
    gr.head = head_id;
    gr.pos = std::move(body.pos);
    gr.neg = std::move(body.neg);
    if (!dedupe_rule(gr)) return;
    bump_count(rule);
    stratum->rules.push_back(std::move(gr));
  }

  // ----- helpers -------------------------------------------------------------

  bool edb_atom(std::uint32_t id) const {
    if (id < k_) return true;
    return out_.atom_kinds[id - k_] == AtomKind::external;
  }

  int slot_of(std::uint32_t literal_id) const {
    std::size_t s = 0;
    while (s + 1 < t_.schema.slot_count() &&
           t_.schema.literal_offset(s + 1) <= literal_id)
      ++s;
    return static_cast<int>(s);
  }

  static std::string atom_text(const GroundAtomRef& g) {
    if (g.args.empty()) return g.pred;
    std::string s = g.pred + "(";
    for (std::size_t i = 0; i < g.args.size(); ++i) {
      if (i) s += ",";
      s += g.args[i];
    }
    s += ")";
    return s;
  }

  std::uint32_t intern(const GroundAtomRef& g, AtomKind kind) {
    std::string key = atom_text(g);
    auto it = atom_ids_.find(key);
    if (it != atom_ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(k_ + out_.atom_names.size());
    out_.atom_names.push_back(key);
    out_.atom_kinds.push_back(kind);
    atom_ids_.emplace(std::move(key), id);
    return id;
  }

  void add_possible(const GroundAtomRef& g) {
    auto& vec = possible_[g.pred];
    std::string key = atom_text(g);
    if (!possible_seen_.insert(key).second) return;
    vec.push_back(g);
    ++possible_total_;
  }

  bool dedupe_rule(const GroundRule& r) {
    Fnv64 h;
    h.u64(r.head);
    for (auto id : r.pos) h.u64(id);
    h.sep();
    for (auto id : r.neg) h.u64(id);
    return seen_rules_.insert(h.value()).second;
  }

  bool dedupe_clause(const GroundClause& c) {
    Fnv64 h;
    for (auto id : c.pos) h.u64(id);
    h.sep();
    for (auto id : c.neg) h.u64(id);
    return seen_clauses_.insert(h.value()).second;
  }

  void bump_count(const Rule& rule) {
    if (++rule_count_ > opts_.max_ground_rules)
      throw GroundError("ground theory exceeds cap of " +
                            std::to_string(opts_.max_ground_rules) +
                            " rule instances",
                        rule.line, 0);
  }

  std::optional<std::string> ground_term(const Term& t, const Subst& subst) const {
    if (t.kind == Term::Kind::constant) return t.text;
    auto it = subst.find(t.text);
    if (it == subst.end()) return std::nullopt;
    return it->second;
  }

  static bool all_bound(const Atom& a, const Subst& subst) {
    for (const auto& t : a.args)
      if (t.kind == Term::Kind::variable && !subst.count(t.text)) return false;
    return true;
  }

  const ParsedTheory& t_;
  const GroundOptions& opts_;
  GroundTheoryData out_;
  std::size_t k_ = 0;
  std::set<std::string> defined_;
  std::set<std::string> outcome_preds_;
  std::vector<Scc> sccs_;
  std::unordered_map<std::string, std::uint32_t> atom_ids_;
  std::unordered_map<std::string, std::vector<GroundAtomRef>> possible_;
  std::unordered_set<std::string> possible_seen_;
  std::size_t possible_total_ = 0;
  std::unordered_set<std::uint64_t> seen_rules_;
  std::unordered_set<std::uint64_t> seen_clauses_;
  std::size_t rule_count_ = 0;
};

}  // namespace detail

inline GroundTheoryData ground(const ParsedTheory& theory,
                               const GroundOptions& opts = {}) {
  detail::Grounder g(theory, opts);
  return g.run();
}

inline std::shared_ptr<const GroundTheory> compile_theory(
    std::string_view source, const GroundOptions& opts = {}) {
  auto parsed = parse_theory(source);
  return std::make_shared<GroundTheory>(ground(parsed, opts));
}

}  // namespace nsl
