#include "betae/query.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <stdexcept>

#include "betae/errors.hpp"

namespace betae {

QueryNode make_anchor(EntityId v) { return QueryNode{NodeKind::kAnchor, v, {}}; }

QueryNode make_projection(RelationId r, QueryNode child) {
  QueryNode n{NodeKind::kProjection, r, {}};
  n.children.push_back(std::move(child));
  return n;
}

QueryNode make_intersection(std::vector<QueryNode> children) {
  if (children.size() < 2) {
    throw std::invalid_argument("intersection needs >= 2 children");
  }
  return QueryNode{NodeKind::kIntersection, 0, std::move(children)};
}

QueryNode make_negation(QueryNode child) {
  QueryNode n{NodeKind::kNegation, 0, {}};
  n.children.push_back(std::move(child));
  return n;
}

QueryNode make_union(std::vector<QueryNode> children) {
  if (children.size() < 2) {
    throw std::invalid_argument("union needs >= 2 children");
  }
  return QueryNode{NodeKind::kUnion, 0, std::move(children)};
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Parser {
  std::string_view text;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' ||
            text[pos] == '\r')) {
      ++pos;
    }
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(pos, message);
  }

  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c) {
      fail(std::string("expected '") + c + "'");
    }
    ++pos;
  }

  std::string_view token() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' &&
           text[pos] != '\n' && text[pos] != '\r' && text[pos] != '(' &&
           text[pos] != ')') {
      ++pos;
    }
    if (pos == start) fail("expected a token");
    return text.substr(start, pos - start);
  }

  std::uint32_t integer() {
    skip_ws();
    const std::size_t at = pos;
    std::string_view tok = token();
    std::uint32_t value = 0;
    auto [ptr, ec] =
        std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      pos = at;
      fail("expected a non-negative integer id, got '" + std::string(tok) +
           "'");
    }
    return value;
  }

  bool at_close() {
    skip_ws();
    return pos < text.size() && text[pos] == ')';
  }

  QueryNode node() {
    expect('(');
    std::string_view head = token();
    QueryNode out;
    if (head == "e") {
      out = make_anchor(integer());
    } else if (head == "p") {
      const RelationId r = integer();
      out = make_projection(r, node());
    } else if (head == "not") {
      out = make_negation(node());
    } else if (head == "and" || head == "or") {
      std::vector<QueryNode> children;
      while (!at_close()) {
        if (pos >= text.size()) fail("unterminated list");
        children.push_back(node());
      }
      if (children.size() < 2) {
        fail(std::string(head) + " needs at least 2 arguments");
      }
      out = head == "and" ? make_intersection(std::move(children))
                          : make_union(std::move(children));
    } else {
      fail("unknown operator '" + std::string(head) + "'");
    }
    expect(')');
    return out;
  }
};

void print_into(const QueryNode& q, std::string& out) {
  switch (q.kind) {
    case NodeKind::kAnchor:
      out += "(e ";
      out += std::to_string(q.id);
      out += ")";
      break;
    case NodeKind::kProjection:
      out += "(p ";
      out += std::to_string(q.id);
      out += " ";
      print_into(q.children[0], out);
      out += ")";
      break;
    case NodeKind::kNegation:
      out += "(not ";
      print_into(q.children[0], out);
      out += ")";
      break;
    case NodeKind::kIntersection:
    case NodeKind::kUnion:
      out += q.kind == NodeKind::kIntersection ? "(and" : "(or";
      for (const QueryNode& c : q.children) {
        out += " ";
        print_into(c, out);
      }
      out += ")";
      break;
  }
}

}  // namespace

QueryGraph parse_query(std::string_view text) {
  Parser p{text};
  QueryNode q = p.node();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input after query");
  return q;
}

std::string print_query(const QueryGraph& q) {
  std::string out;
  print_into(q, out);
  return out;
}

void validate_ids(const QueryGraph& q, std::uint32_t num_entities,
                  std::uint32_t num_relations) {
  if (q.kind == NodeKind::kAnchor && q.id >= num_entities) {
    throw std::out_of_range("unknown entity id " + std::to_string(q.id));
  }
  if (q.kind == NodeKind::kProjection && q.id >= num_relations) {
    throw std::out_of_range("unknown relation id " + std::to_string(q.id));
  }
  for (const QueryNode& c : q.children) {
    validate_ids(c, num_entities, num_relations);
  }
}

// ---------------------------------------------------------------------------
// Rewrites

QueryGraph to_dm(const QueryGraph& q) {
  QueryNode out;
  out.kind = q.kind;
  out.id = q.id;
  out.children.reserve(q.children.size());
  for (const QueryNode& c : q.children) out.children.push_back(to_dm(c));
  if (out.kind == NodeKind::kUnion) {
    std::vector<QueryNode> negated;
    negated.reserve(out.children.size());
    for (QueryNode& c : out.children) {
      negated.push_back(make_negation(std::move(c)));
    }
    return make_negation(make_intersection(std::move(negated)));
  }
  return out;
}

std::vector<QueryGraph> to_dnf(const QueryGraph& q) {
  switch (q.kind) {
    case NodeKind::kAnchor:
      return {q};
    case NodeKind::kProjection: {
      std::vector<QueryGraph> out;
      for (QueryGraph& d : to_dnf(q.children[0])) {
        out.push_back(make_projection(q.id, std::move(d)));
      }
      return out;
    }
    case NodeKind::kNegation: {
      std::vector<QueryGraph> inner = to_dnf(q.children[0]);
      if (inner.size() != 1) {
        throw std::invalid_argument(
            "to_dnf: negation over a union is out of scope");
      }
      return {make_negation(std::move(inner[0]))};
    }
    case NodeKind::kUnion: {
      std::vector<QueryGraph> out;
      for (const QueryNode& c : q.children) {
        for (QueryGraph& d : to_dnf(c)) out.push_back(std::move(d));
      }
      return out;
    }
    case NodeKind::kIntersection: {
      // Cross product of the children's disjunct lists.
      std::vector<std::vector<QueryGraph>> parts;
      parts.reserve(q.children.size());
      for (const QueryNode& c : q.children) parts.push_back(to_dnf(c));
      std::vector<std::vector<QueryGraph>> combos = {{}};
      for (const auto& part : parts) {
        std::vector<std::vector<QueryGraph>> next;
        next.reserve(combos.size() * part.size());
        for (const auto& combo : combos) {
          for (const QueryGraph& d : part) {
            auto extended = combo;
            extended.push_back(d);
            next.push_back(std::move(extended));
          }
        }
        combos = std::move(next);
      }
      std::vector<QueryGraph> out;
      out.reserve(combos.size());
      for (auto& combo : combos) {
        out.push_back(make_intersection(std::move(combo)));
      }
      return out;
    }
  }
  throw std::logic_error("to_dnf: unreachable");
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

AnswerSet sorted_unique(std::vector<EntityId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

AnswerSet evaluate(const QueryGraph& q, const KnowledgeGraph& g) {
  switch (q.kind) {
    case NodeKind::kAnchor:
      return {q.id};
    case NodeKind::kProjection: {
      const AnswerSet base = evaluate(q.children[0], g);
      std::vector<EntityId> out;
      for (EntityId v : base) {
        const auto& next = g.neighbors(v, q.id);
        out.insert(out.end(), next.begin(), next.end());
      }
      return sorted_unique(std::move(out));
    }
    case NodeKind::kIntersection: {
      AnswerSet acc = evaluate(q.children[0], g);
      for (std::size_t i = 1; i < q.children.size() && !acc.empty(); ++i) {
        const AnswerSet next = evaluate(q.children[i], g);
        AnswerSet merged;
        std::set_intersection(acc.begin(), acc.end(), next.begin(),
                              next.end(), std::back_inserter(merged));
        acc = std::move(merged);
      }
      return acc;
    }
    case NodeKind::kNegation: {
      const AnswerSet inner = evaluate(q.children[0], g);
      AnswerSet out;
      out.reserve(g.num_entities() - inner.size());
      std::size_t i = 0;
      for (EntityId v = 0; v < g.num_entities(); ++v) {
        if (i < inner.size() && inner[i] == v) {
          ++i;
        } else {
          out.push_back(v);
        }
      }
      return out;
    }
    case NodeKind::kUnion: {
      std::vector<EntityId> out;
      for (const QueryNode& c : q.children) {
        const AnswerSet part = evaluate(c, g);
        out.insert(out.end(), part.begin(), part.end());
      }
      return sorted_unique(std::move(out));
    }
  }
  throw std::logic_error("evaluate: unreachable");
}

std::size_t node_count(const QueryGraph& q) {
  std::size_t n = 1;
  for (const QueryNode& c : q.children) n += node_count(c);
  return n;
}

std::size_t count_kind(const QueryGraph& q, NodeKind kind) {
  std::size_t n = q.kind == kind ? 1 : 0;
  for (const QueryNode& c : q.children) n += count_kind(c, kind);
  return n;
}

// ---------------------------------------------------------------------------
// Structure templates

bool is_trainable_structure(std::string_view name) {
  return name != "ip" && name != "pi" && name != "2u" && name != "up";
}

bool is_negation_structure(std::string_view name) {
  return name.find('n') != std::string_view::npos;
}

bool has_union(std::string_view name) {
  return name.find('u') != std::string_view::npos;
}

namespace {

QueryNode anchor0() { return make_anchor(0); }
QueryNode p(QueryNode c) { return make_projection(0, std::move(c)); }

std::map<std::string, QueryGraph, std::less<>> make_skeletons() {
  std::map<std::string, QueryGraph, std::less<>> m;
  m["1p"] = p(anchor0());
  m["2p"] = p(p(anchor0()));
  m["3p"] = p(p(p(anchor0())));
  m["2i"] = make_intersection({p(anchor0()), p(anchor0())});
  m["3i"] = make_intersection({p(anchor0()), p(anchor0()), p(anchor0())});
  m["ip"] = p(make_intersection({p(anchor0()), p(anchor0())}));
  m["pi"] = make_intersection({p(p(anchor0())), p(anchor0())});
  m["2u"] = make_union({p(anchor0()), p(anchor0())});
  m["up"] = p(make_union({p(anchor0()), p(anchor0())}));
  m["2in"] = make_intersection({p(anchor0()), make_negation(p(anchor0()))});
  m["3in"] = make_intersection(
      {p(anchor0()), p(anchor0()), make_negation(p(anchor0()))});
  m["inp"] =
      p(make_intersection({p(anchor0()), make_negation(p(anchor0()))}));
  m["pin"] = make_intersection({p(p(anchor0())), make_negation(p(anchor0()))});
  m["pni"] = make_intersection({make_negation(p(p(anchor0()))), p(anchor0())});
  return m;
}

const std::map<std::string, QueryGraph, std::less<>>& skeletons() {
  static const auto m = make_skeletons();
  return m;
}

// Shape signature ignoring ids; children of commutative nodes are sorted so
// the signature is order-independent.
std::string shape_signature(const QueryNode& q) {
  switch (q.kind) {
    case NodeKind::kAnchor:
      return "e";
    case NodeKind::kProjection:
      return "p(" + shape_signature(q.children[0]) + ")";
    case NodeKind::kNegation:
      return "n(" + shape_signature(q.children[0]) + ")";
    case NodeKind::kIntersection:
    case NodeKind::kUnion: {
      std::vector<std::string> parts;
      parts.reserve(q.children.size());
      for (const QueryNode& c : q.children) {
        parts.push_back(shape_signature(c));
      }
      std::sort(parts.begin(), parts.end());
      std::string out = q.kind == NodeKind::kIntersection ? "i[" : "u[";
      for (const std::string& s : parts) {
        out += s;
        out += ",";
      }
      out += "]";
      return out;
    }
  }
  return "?";
}

}  // namespace

const QueryGraph& structure_skeleton(std::string_view name) {
  auto it = skeletons().find(name);
  if (it == skeletons().end()) {
    throw std::invalid_argument("unknown structure '" + std::string(name) +
                                "'");
  }
  return it->second;
}

std::optional<std::string> structure_of(const QueryGraph& q) {
  static const std::map<std::string, std::string> by_signature = [] {
    std::map<std::string, std::string> m;
    for (const char* name : kStructureNames) {
      m[shape_signature(structure_skeleton(name))] = name;
    }
    return m;
  }();
  auto it = by_signature.find(shape_signature(q));
  if (it == by_signature.end()) return std::nullopt;
  return it->second;
}

}  // namespace betae
