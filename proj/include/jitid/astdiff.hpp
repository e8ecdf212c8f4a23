#ifndef JITID_ASTDIFF_HPP
#define JITID_ASTDIFF_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jitid/lex.hpp"

namespace jitid::astdiff {

struct AstNode {
    int id = -1;
    std::string label;          // grammar category, or terminal text for leaves
    bool is_leaf = false;
    std::vector<int> children;  // ids into the owning tree's node arena
};

struct AstTree {
    std::vector<AstNode> nodes;
    int root = -1;

    const AstNode& node(int id) const { return nodes[static_cast<size_t>(id)]; }
    size_t size() const { return nodes.size(); }
};

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/** Parses one method declaration (Java subset) into a rooted tree.
 *
 *  The root is a MethodDeclaration whose children cover modifiers (leaves),
 *  the return Type subtree, the method name leaf, FormalParameters, an
 *  optional Throws clause, and a Block body. Structural keywords and pure
 *  punctuation are folded into node labels; identifiers, literals, operators
 *  and modifiers survive as leaves.
 */
AstTree parse_method(std::string_view source);

/** Same, but starting from an existing token stream. */
AstTree parse_method_tokens(const std::vector<lex::CodeToken>& tokens);

enum class NodeEdit { Keep, Insert, Delete, ReplaceOld, ReplaceNew, Move };

enum class EdgeType {
    Parent, Child, Subnode, Supernode, NextSubnode, PrevSubnode, Aligned
};

struct DiffNode {
    int id = -1;
    std::string label;
    bool is_leaf = false;
    NodeEdit edit = NodeEdit::Keep;
};

struct DiffEdge {
    int src;
    int dst;
    EdgeType type;

    bool operator==(const DiffEdge&) const = default;
};

/** Unified AST edit graph: kept nodes appear once, deleted/inserted nodes
 *  keep their side, replaced pairs are joined by Aligned edges. A plain
 *  graph (the degenerate all-Keep case) represents a single tree. */
struct DiffAstGraph {
    std::vector<DiffNode> nodes;
    std::vector<DiffEdge> edges;
};

struct DiffOptions {
    // minimum matched-descendant dice for bottom-up container matching
    double bottomup_threshold = 0.5;
};

/** Node-level matching underlying diff_asts, exposed for inspection.
 *  old_to_new[id] / new_to_old[id] give the partner node or -1. */
struct TreeMatching {
    std::vector<int> old_to_new;
    std::vector<int> new_to_old;
    std::vector<bool> old_moved;   // matched old nodes whose position changed
};

TreeMatching match_trees(const AstTree& t_old, const AstTree& t_new,
                         const DiffOptions& options = {});

/** Computes the unified edit graph between two parses of the same method. */
DiffAstGraph diff_asts(const AstTree& t_old, const AstTree& t_new,
                       const DiffOptions& options = {});

/** Wraps a single tree as an all-Keep graph (the post hoc representation). */
DiffAstGraph plain_graph(const AstTree& tree);

/** Adds one child node per subtoken under every identifier leaf that splits
 *  into two or more subtokens. Subtoken nodes inherit the parent's edit label
 *  and are wired with Subnode/Supernode and NextSubnode/PrevSubnode edges. */
DiffAstGraph add_subtoken_nodes(DiffAstGraph graph);

/** JSON ingestion for externally parsed trees:
 *  {"root": id, "nodes": [{"id", "label", "is_leaf", "children"}...]}. */
AstTree ast_from_json(const std::string& json_text);
std::string ast_to_json(const AstTree& tree);

/** Signature facts read off a parsed method, for filters and heuristics. */
struct MethodShape {
    std::string name;
    std::vector<std::string> return_type_tokens;       // head name(s), generics stripped
    std::vector<std::string> full_return_type_tokens;  // including type arguments
    struct Param {
        std::vector<std::string> type_tokens;          // full type, flattened
        std::string name;
    };
    std::vector<Param> parameters;
    std::vector<std::vector<std::string>> return_statements;   // leaf tokens each
};

MethodShape method_shape(const AstTree& tree);

const char* to_string(NodeEdit e);
const char* to_string(EdgeType t);

}   // namespace jitid::astdiff

#endif
