#ifndef LMNCC_GRAPH_HPP
#define LMNCC_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmncc/rule.hpp"

namespace lmncc {

using AtomId = uint32_t;
using MembraneId = uint32_t;
using LinkId = uint32_t;
constexpr uint32_t k_none = 0xffffffffu;

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LinkArityViolation : GraphError {
  using GraphError::GraphError;
};
struct ArithmeticError : GraphError {
  using GraphError::GraphError;
};

// One endpoint of a link: which atom, which argument slot.
struct LinkEnd {
  AtomId atom;
  uint32_t pos;
  bool operator==(const LinkEnd &o) const { return atom == o.atom && pos == o.pos; }
};

struct Link {
  LinkId id = k_none;
  std::vector<LinkEnd> ends;
  std::string name;  // nonempty: named free link to the environment
  bool hyper = false;
  bool alive = false;
};

struct Atom {
  AtomId id = k_none;
  MembraneId mem = k_none;
  std::string name;
  AtomKind kind = AtomKind::Plain;
  int64_t value = 0;  // IntLit only
  std::vector<LinkId> args;
  bool alive = false;

  bool is_int() const { return kind == AtomKind::IntLit; }
  bool is_connector() const { return kind == AtomKind::Connector; }
  // By convention the last argument of a data or call atom is its root link.
  LinkId root_link() const { return args.empty() ? k_none : args.back(); }
};

struct Membrane {
  MembraneId id = k_none;
  MembraneId parent = k_none;
  std::vector<AtomId> atoms;
  std::vector<MembraneId> children;
  std::vector<RulePtr> rules;
  bool alive = false;

  // Stability memo; touch() clears it along the mutated ancestor path.
  mutable std::optional<bool> stable_cache;
};

// The rewriting world: a tree of membranes whose atoms are connected by
// links. In Strict link mode every link is held to at most two occurrences;
// Relaxed mode tolerates n-fold occurrences and flags them as hyperlinks
// (the representation used for compiled variables).
class World {
 public:
  enum class LinkMode { Strict, Relaxed };

  explicit World(LinkMode mode = LinkMode::Strict) : mode_(mode) {
    root_ = alloc_membrane();
  }

  LinkMode link_mode() const { return mode_; }
  void set_link_mode(LinkMode m) { mode_ = m; }
  MembraneId root() const { return root_; }
  uint64_t version() const { return version_; }

  // Constructor names, used to tell ground data from pending calls.
  std::set<std::string> ctor_names{"nil", "cons", "success", "fail"};
  bool is_ctor(const std::string &n) const { return ctor_names.count(n) > 0; }

  // Atoms that have no result position (strict equality, constraint calls):
  // they never act as a link's value producer.
  std::set<std::string> no_root_names{"eq_"};

  const Membrane &mem(MembraneId m) const { return membranes_.at(m); }
  Membrane &mem(MembraneId m) { return membranes_.at(m); }
  const Atom &atom(AtomId a) const { return atoms_.at(a); }
  Atom &atom(AtomId a) { return atoms_.at(a); }
  const Link &link(LinkId l) const { return links_.at(l); }
  Link &link(LinkId l) { return links_.at(l); }

  MembraneId new_membrane(std::optional<MembraneId> parent) {
    MembraneId m = alloc_membrane();
    if (parent) {
      membranes_[m].parent = *parent;
      membranes_[*parent].children.push_back(m);
      touch(*parent);
    }
    return m;
  }

  LinkId new_link() {
    LinkId l = static_cast<LinkId>(links_.size());
    links_.push_back(Link{l, {}, "", false, true});
    return l;
  }

  // Named free link; reuses the existing link of that name.
  LinkId named_link(const std::string &name) {
    auto it = named_.find(name);
    if (it != named_.end()) return it->second;
    LinkId l = new_link();
    links_[l].name = name;
    named_[name] = l;
    return l;
  }
  std::optional<LinkId> find_named(const std::string &name) const {
    auto it = named_.find(name);
    if (it == named_.end()) return std::nullopt;
    return it->second;
  }

  AtomId add_atom(MembraneId m, const std::string &name, std::vector<LinkId> args,
                  AtomKind kind = AtomKind::Plain, int64_t value = 0) {
    if (mode_ == LinkMode::Strict) {
      std::map<LinkId, int> added;
      for (LinkId l : args) added[l]++;
      for (auto &[l, n] : added) {
        if (links_[l].ends.size() + n > 2)
          throw LinkArityViolation("link occurs more than twice: " + link_display(l));
      }
    }
    AtomId a = static_cast<AtomId>(atoms_.size());
    atoms_.push_back(Atom{a, m, name, kind, value, args, true});
    membranes_[m].atoms.push_back(a);
    for (uint32_t i = 0; i < args.size(); ++i) {
      links_[args[i]].ends.push_back(LinkEnd{a, i});
      if (links_[args[i]].ends.size() > 2) links_[args[i]].hyper = true;
    }
    touch(m);
    return a;
  }

  void remove_atom(AtomId a) {
    Atom &at = atoms_.at(a);
    if (!at.alive) return;
    for (uint32_t i = 0; i < at.args.size(); ++i) detach_end(at.args[i], a, i);
    auto &v = membranes_[at.mem].atoms;
    v.erase(std::find(v.begin(), v.end(), a));
    touch(at.mem);
    at.alive = false;
  }

  void move_atom(AtomId a, MembraneId to) {
    Atom &at = atoms_.at(a);
    auto &v = membranes_[at.mem].atoms;
    v.erase(std::find(v.begin(), v.end(), a));
    touch(at.mem);
    at.mem = to;
    membranes_[to].atoms.push_back(a);
    touch(to);
  }

  void move_membrane(MembraneId m, MembraneId to) {
    Membrane &mm = membranes_.at(m);
    if (mm.parent != k_none) {
      auto &v = membranes_[mm.parent].children;
      v.erase(std::find(v.begin(), v.end(), m));
      touch(mm.parent);
    }
    mm.parent = to;
    membranes_[to].children.push_back(m);
    touch(to);
  }

  // Removes a membrane and its entire subtree.
  void remove_membrane(MembraneId m) {
    Membrane &mm = membranes_.at(m);
    if (!mm.alive) return;
    for (AtomId a : std::vector<AtomId>(mm.atoms.begin(), mm.atoms.end())) remove_atom(a);
    for (MembraneId c : std::vector<MembraneId>(mm.children.begin(), mm.children.end()))
      remove_membrane(c);
    if (mm.parent != k_none) {
      auto &v = membranes_[mm.parent].children;
      v.erase(std::find(v.begin(), v.end(), m));
      touch(mm.parent);
    }
    mm.alive = false;
  }

  // Deletes the membrane itself, reparenting its contents to `to`.
  void dissolve_membrane(MembraneId m, MembraneId to) {
    Membrane &mm = membranes_.at(m);
    for (AtomId a : std::vector<AtomId>(mm.atoms.begin(), mm.atoms.end())) move_atom(a, to);
    for (MembraneId c : std::vector<MembraneId>(mm.children.begin(), mm.children.end()))
      move_membrane(c, to);
    mm.rules.clear();
    remove_membrane(m);
  }

  void add_rule(MembraneId m, RulePtr r) {
    membranes_[m].rules.push_back(std::move(r));
    touch(m);
  }

  // Merges link `gone` into `keep`; all endpoints are re-targeted.
  void fuse_links(LinkId keep, LinkId gone) {
    if (keep == gone) return;
    Link &g = links_[gone];
    Link &k = links_[keep];
    for (LinkEnd e : g.ends) {
      atoms_[e.atom].args[e.pos] = keep;
      k.ends.push_back(e);
    }
    if (k.ends.size() > 2) k.hyper = true;
    if (!g.name.empty()) {
      if (k.name.empty()) k.name = g.name;
      named_[g.name] = keep;  // the old name stays resolvable as an alias
    }
    g.ends.clear();
    g.alive = false;
    bump();
  }

  // Removes every "=" connector in the subtree of m, merging the two links
  // it joins. Idempotent; shorthand and expanded notations normalize to
  // isomorphic graphs.
  void fuse_connectors(MembraneId m) {
    bool again = true;
    while (again) {
      again = false;
      std::vector<AtomId> conns;
      collect_connectors(m, conns);
      for (AtomId a : conns) {
        Atom &at = atoms_[a];
        if (!at.alive || !at.is_connector()) continue;
        LinkId l0 = at.args[0], l1 = at.args[1];
        remove_atom(a);
        if (l0 != l1) {
          // Keep a named link over an anonymous one.
          if (!links_[l1].name.empty() && links_[l0].name.empty()) std::swap(l0, l1);
          fuse_links(l0, l1);
        }
        again = true;
      }
    }
  }

  // Deep copy of a membrane subtree into `dest_parent`. Links internal to
  // the fragment get fresh ids; links reaching outside are shared. Rules
  // are copied verbatim.
  MembraneId copy_membrane(MembraneId src, MembraneId dest_parent) {
    std::map<LinkId, LinkId> link_map;
    std::set<AtomId> fragment;
    collect_atoms(src, fragment);
    return copy_rec(src, dest_parent, fragment, link_map);
  }

  // Copies a set of atoms plus membranes into `dest`; used to duplicate the
  // contents bound to a process context.
  void copy_fragment(const std::vector<AtomId> &atoms, const std::vector<MembraneId> &mems,
                     MembraneId dest) {
    std::set<AtomId> fragment(atoms.begin(), atoms.end());
    for (MembraneId m : mems) collect_atoms(m, fragment);
    std::map<LinkId, LinkId> link_map;
    for (AtomId a : atoms) copy_atom(a, dest, fragment, link_map);
    for (MembraneId m : mems) copy_rec(m, dest, fragment, link_map);
  }

  int link_occurrences(LinkId l) const { return static_cast<int>(links_.at(l).ends.size()); }

  // A link is ground when some integer atom provides its value.
  std::optional<int64_t> ground_int(LinkId l) const {
    for (const LinkEnd &e : links_.at(l).ends) {
      const Atom &a = atoms_.at(e.atom);
      if (a.alive && a.is_int() && e.pos == 0) return a.value;
    }
    return std::nullopt;
  }

  // The atom producing the value on link l (root position is the last arg).
  // Ground data wins over other candidates, so a name tag hanging off the
  // same link never shadows the value.
  std::optional<AtomId> producer(LinkId l) const {
    std::optional<AtomId> fallback;
    for (const LinkEnd &e : links_.at(l).ends) {
      const Atom &a = atoms_.at(e.atom);
      if (!a.alive || a.is_connector() || a.args.empty()) continue;
      if (a.args.back() != l || e.pos != a.args.size() - 1) continue;
      if (no_root_names.count(a.name)) continue;
      if (a.is_int() || is_ctor(a.name)) return a.id;
      if (!fallback) fallback = a.id;
    }
    return fallback;
  }

  bool is_ancestor(MembraneId anc, MembraneId m) const {
    while (m != k_none) {
      if (m == anc) return true;
      m = membranes_[m].parent;
    }
    return false;
  }

  int depth(MembraneId m) const {
    int d = 0;
    while (membranes_[m].parent != k_none) {
      m = membranes_[m].parent;
      ++d;
    }
    return d;
  }

  // Preorder index of every live membrane, in child-list order.
  std::vector<MembraneId> preorder() const {
    std::vector<MembraneId> out;
    preorder_rec(root_, out);
    return out;
  }

  // Invalidate stability memos along the ancestor path and bump the version.
  void touch(MembraneId m) {
    bump();
    while (m != k_none) {
      membranes_[m].stable_cache.reset();
      m = membranes_[m].parent;
    }
  }

  size_t atom_count(MembraneId m) const { return membranes_.at(m).atoms.size(); }

  std::vector<AtomId> subtree_atoms(MembraneId m) const {
    std::set<AtomId> s;
    collect_atoms(m, s);
    return std::vector<AtomId>(s.begin(), s.end());
  }

 private:
  void bump() { ++version_; }

  MembraneId alloc_membrane() {
    MembraneId m = static_cast<MembraneId>(membranes_.size());
    Membrane mm;
    mm.id = m;
    mm.alive = true;
    membranes_.push_back(std::move(mm));
    bump();
    return m;
  }

  void detach_end(LinkId l, AtomId a, uint32_t pos) {
    auto &ends = links_[l].ends;
    for (auto it = ends.begin(); it != ends.end(); ++it) {
      if (it->atom == a && it->pos == pos) {
        ends.erase(it);
        return;
      }
    }
  }

  void collect_connectors(MembraneId m, std::vector<AtomId> &out) const {
    const Membrane &mm = membranes_.at(m);
    for (AtomId a : mm.atoms)
      if (atoms_[a].is_connector()) out.push_back(a);
    for (MembraneId c : mm.children) collect_connectors(c, out);
  }

  void collect_atoms(MembraneId m, std::set<AtomId> &out) const {
    const Membrane &mm = membranes_.at(m);
    for (AtomId a : mm.atoms) out.insert(a);
    for (MembraneId c : mm.children) collect_atoms(c, out);
  }

  LinkId mapped_link(LinkId l, const std::set<AtomId> &fragment, std::map<LinkId, LinkId> &lm) {
    auto it = lm.find(l);
    if (it != lm.end()) return it->second;
    // Internal iff every endpoint lies on a fragment atom.
    bool internal = true;
    for (const LinkEnd &e : links_[l].ends)
      if (!fragment.count(e.atom)) internal = false;
    LinkId target = internal ? new_link() : l;
    lm[l] = target;
    return target;
  }

  AtomId copy_atom(AtomId a, MembraneId dest, const std::set<AtomId> &fragment,
                   std::map<LinkId, LinkId> &lm) {
    const Atom src = atoms_[a];
    std::vector<LinkId> args;
    args.reserve(src.args.size());
    for (LinkId l : src.args) args.push_back(mapped_link(l, fragment, lm));
    return add_atom(dest, src.name, std::move(args), src.kind, src.value);
  }

  MembraneId copy_rec(MembraneId src, MembraneId dest_parent, const std::set<AtomId> &fragment,
                      std::map<LinkId, LinkId> &lm) {
    MembraneId m = new_membrane(dest_parent);
    const Membrane srcm = membranes_[src];
    for (AtomId a : srcm.atoms) copy_atom(a, m, fragment, lm);
    for (MembraneId c : srcm.children) copy_rec(c, m, fragment, lm);
    for (const RulePtr &r : srcm.rules) membranes_[m].rules.push_back(r);
    return m;
  }

  void preorder_rec(MembraneId m, std::vector<MembraneId> &out) const {
    out.push_back(m);
    for (MembraneId c : membranes_[m].children) preorder_rec(c, out);
  }

  std::string link_display(LinkId l) const {
    const Link &lk = links_.at(l);
    return lk.name.empty() ? "L" + std::to_string(l) : lk.name;
  }

  LinkMode mode_;
  MembraneId root_;
  std::vector<Membrane> membranes_;
  std::vector<Atom> atoms_;
  std::vector<Link> links_;
  std::map<std::string, LinkId> named_;
  uint64_t version_ = 1;
};

}  // namespace lmncc

#endif
