#include "jitid/astdiff.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace jitid::astdiff {

using lex::CodeToken;
using lex::TokenKind;

namespace {

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

const std::unordered_map<std::string_view, int>& modifier_words() {
    static const std::unordered_map<std::string_view, int> words = {
        {"public", 0},   {"protected", 0}, {"private", 0}, {"static", 0},
        {"final", 0},    {"abstract", 0},  {"synchronized", 0},
        {"native", 0},   {"strictfp", 0},  {"default", 0}, {"transient", 0},
        {"volatile", 0},
    };
    return words;
}

class MethodParser {
public:
    explicit MethodParser(const std::vector<CodeToken>& tokens) : toks_(tokens) {}

    AstTree parse() {
        int root = internal("MethodDeclaration");
        tree_.root = root;

        parse_modifiers(root);
        if (is_op("<")) parse_type_parameters(root);
        int type = parse_type_or_throw();
        attach(root, type);

        if (!is_kind(TokenKind::Identifier)) fail("expected method name");
        attach(root, leaf(cur().text));
        advance();

        attach(root, parse_formal_parameters());
        if (is_word("throws")) attach(root, parse_throws());

        if (is_sep("{")) {
            attach(root, parse_block());
        } else if (is_sep(";")) {
            advance();   // abstract/native method, no body
        } else {
            fail("expected method body or ';'");
        }
        if (!at_end()) fail("trailing tokens after method declaration");
        return std::move(tree_);
    }

private:
    const std::vector<CodeToken>& toks_;
    size_t pos_ = 0;
    int pending_gt_ = 0;   // '>>' seen in a type context, one '>' still owed
    AstTree tree_;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at token " + std::to_string(pos_));
    }

    bool at_end() const { return pos_ >= toks_.size() && pending_gt_ == 0; }
    const CodeToken& cur() const {
        if (pos_ >= toks_.size()) throw ParseError("unexpected end of method source");
        return toks_[pos_];
    }
    void advance() { ++pos_; }

    bool is_kind(TokenKind k) const { return pos_ < toks_.size() && toks_[pos_].kind == k; }
    bool is_word(std::string_view w) const {
        return pos_ < toks_.size() && pending_gt_ == 0 && toks_[pos_].text == w;
    }
    bool is_sep(std::string_view s) const {
        return is_word(s) && toks_[pos_].kind == TokenKind::Separator;
    }
    bool is_op(std::string_view s) const {
        return is_word(s) && toks_[pos_].kind == TokenKind::Operator;
    }

    // '>' tokens may arrive glued together (">>", ">>>") when generics close
    bool peek_gt() const {
        if (pending_gt_ > 0) return true;
        return pos_ < toks_.size() && toks_[pos_].kind == TokenKind::Operator &&
               toks_[pos_].text.find_first_not_of('>') == std::string::npos;
    }
    void consume_gt() {
        if (pending_gt_ > 0) {
            --pending_gt_;
            return;
        }
        if (!peek_gt()) fail("expected '>'");
        pending_gt_ = static_cast<int>(cur().text.size()) - 1;
        advance();
    }

    int internal(std::string label) {
        int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(AstNode{id, std::move(label), false, {}});
        return id;
    }
    int leaf(std::string text) {
        int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.push_back(AstNode{id, std::move(text), true, {}});
        return id;
    }
    void attach(int parent, int child) { tree_.nodes[parent].children.push_back(child); }

    void parse_modifiers(int parent) {
        while (pos_ < toks_.size()) {
            if (is_sep("@")) {
                int ann = internal("Annotation");
                advance();
                if (!is_kind(TokenKind::Identifier)) fail("expected annotation name");
                attach(ann, leaf(cur().text));
                advance();
                if (is_sep("(")) consume_balanced_into(ann, "(", ")");
                attach(parent, ann);
            } else if (cur().kind == TokenKind::Keyword && modifier_words().count(cur().text)) {
                attach(parent, leaf(cur().text));
                advance();
            } else {
                break;
            }
        }
    }

    void parse_type_parameters(int parent) {
        int tp = internal("TypeParameters");
        consume_gt_balanced_into(tp);
        attach(parent, tp);
    }

    bool type_can_start() const {
        if (pos_ >= toks_.size() || pending_gt_ > 0) return false;
        const CodeToken& t = toks_[pos_];
        if (t.kind == TokenKind::Identifier) return true;
        if (t.kind == TokenKind::Keyword) {
            static const std::unordered_map<std::string_view, int> prims = {
                {"void", 0}, {"boolean", 0}, {"byte", 0}, {"char", 0}, {"short", 0},
                {"int", 0},  {"long", 0},    {"float", 0}, {"double", 0},
            };
            return prims.count(t.text) > 0;
        }
        return t.kind == TokenKind::Operator && t.text == "?";
    }

    int parse_type_or_throw() {
        int t = try_parse_type();
        if (t < 0) fail("expected type");
        return t;
    }

    /** Type := ('?' (extends|super Type)?) | name ('.' name)* args? ('[' ']')*
     *  Children: qualified-name leaves, then an optional TypeArguments node. */
    int try_parse_type() {
        if (!type_can_start()) return -1;
        size_t saved = pos_;
        size_t saved_nodes = tree_.nodes.size();
        int type = internal("Type");

        if (is_op("?")) {
            attach(type, leaf("?"));
            advance();
            if (is_word("extends") || is_word("super")) {
                attach(type, leaf(cur().text));
                advance();
                int inner = try_parse_type();
                if (inner < 0) { rollback(saved, saved_nodes); return -1; }
                attach(type, inner);
            }
            return type;
        }

        attach(type, leaf(cur().text));
        bool primitive = cur().kind == TokenKind::Keyword;
        advance();
        if (!primitive) {
            while (is_sep(".") && pos_ + 1 < toks_.size() &&
                   toks_[pos_ + 1].kind == TokenKind::Identifier) {
                advance();
                attach(type, leaf(cur().text));
                advance();
            }
            if (is_op("<")) {
                int args = internal("TypeArguments");
                advance();
                if (peek_gt()) {   // diamond <>
                    consume_gt();
                } else {
                    while (true) {
                        int arg = try_parse_type();
                        if (arg < 0) { rollback(saved, saved_nodes); return -1; }
                        attach(args, arg);
                        if (is_sep(",")) { advance(); continue; }
                        if (peek_gt()) { consume_gt(); break; }
                        rollback(saved, saved_nodes);
                        return -1;
                    }
                }
                attach(type, args);
            }
        }
        while (is_sep("[")) {
            advance();
            if (!is_sep("]")) { rollback(saved, saved_nodes); return -1; }
            advance();
        }
        return type;
    }

    void rollback(size_t saved_pos, size_t saved_nodes) {
        pos_ = saved_pos;
        pending_gt_ = 0;
        tree_.nodes.resize(saved_nodes);
        for (AstNode& n : tree_.nodes)
            std::erase_if(n.children, [&](int c) {
                return c >= static_cast<int>(saved_nodes);
            });
    }

    int parse_formal_parameters() {
        if (!is_sep("(")) fail("expected '('");
        advance();
        int params = internal("FormalParameters");
        if (is_sep(")")) { advance(); return params; }
        while (true) {
            attach(params, parse_formal_parameter());
            if (is_sep(",")) { advance(); continue; }
            if (is_sep(")")) { advance(); break; }
            fail("expected ',' or ')' in parameter list");
        }
        return params;
    }

    int parse_formal_parameter() {
        int p = internal("FormalParameter");
        parse_modifiers(p);   // final, annotations
        attach(p, parse_type_or_throw());
        if (is_op("...")) {
            attach(p, leaf("..."));
            advance();
        }
        if (!is_kind(TokenKind::Identifier)) fail("expected parameter name");
        attach(p, leaf(cur().text));
        advance();
        while (is_sep("[")) {   // trailing array dims on the name
            advance();
            if (!is_sep("]")) fail("expected ']'");
            advance();
        }
        return p;
    }

    int parse_throws() {
        int t = internal("Throws");
        advance();
        while (true) {
            attach(t, parse_type_or_throw());
            if (is_sep(",")) { advance(); continue; }
            break;
        }
        return t;
    }

    int parse_block() {
        if (!is_sep("{")) fail("expected '{'");
        advance();
        int block = internal("Block");
        while (!is_sep("}")) {
            if (pos_ >= toks_.size()) fail("unbalanced braces");
            attach(block, parse_statement());
        }
        advance();
        return block;
    }

    int parse_statement() {
        if (is_sep("{")) return parse_block();
        if (is_word("return")) {
            advance();
            int s = internal("ReturnStatement");
            consume_expression_into(s);
            expect_semi();
            return s;
        }
        if (is_word("if")) {
            advance();
            int s = internal("IfStatement");
            attach(s, parse_paren_expression());
            attach(s, parse_statement());
            if (is_word("else")) {
                advance();
                attach(s, parse_statement());
            }
            return s;
        }
        if (is_word("while")) {
            advance();
            int s = internal("WhileStatement");
            attach(s, parse_paren_expression());
            if (is_sep(";")) advance();   // do/while tail handled by caller
            else attach(s, parse_statement());
            return s;
        }
        if (is_word("do")) {
            advance();
            int s = internal("DoStatement");
            attach(s, parse_statement());
            if (!is_word("while")) fail("expected 'while' after do body");
            advance();
            attach(s, parse_paren_expression());
            expect_semi();
            return s;
        }
        if (is_word("for")) {
            advance();
            int s = internal("ForStatement");
            if (!is_sep("(")) fail("expected '(' after 'for'");
            int control = internal("ForControl");
            consume_balanced_into(control, "(", ")");
            attach(s, control);
            attach(s, parse_statement());
            return s;
        }
        if (is_word("switch")) {
            advance();
            int s = internal("SwitchStatement");
            attach(s, parse_paren_expression());
            if (!is_sep("{")) fail("expected '{' after switch");
            advance();
            int body = internal("SwitchBlock");
            while (!is_sep("}")) {
                if (pos_ >= toks_.size()) fail("unbalanced braces in switch");
                if (is_word("case") || is_word("default")) {
                    int lbl = internal("CaseLabel");
                    advance();
                    while (!is_op(":") && !is_op("->")) {
                        if (pos_ >= toks_.size()) fail("unterminated case label");
                        consume_leaf_token(lbl);
                    }
                    advance();
                    attach(body, lbl);
                } else {
                    attach(body, parse_statement());
                }
            }
            advance();
            attach(s, body);
            return s;
        }
        if (is_word("try")) {
            advance();
            int s = internal("TryStatement");
            if (is_sep("(")) {
                int res = internal("ResourceSpecification");
                consume_balanced_into(res, "(", ")");
                attach(s, res);
            }
            attach(s, parse_block());
            while (is_word("catch")) {
                advance();
                int c = internal("CatchClause");
                if (!is_sep("(")) fail("expected '(' after catch");
                int param = internal("CatchParameter");
                consume_balanced_into(param, "(", ")");
                attach(c, param);
                attach(c, parse_block());
                attach(s, c);
            }
            if (is_word("finally")) {
                advance();
                int f = internal("FinallyClause");
                attach(f, parse_block());
                attach(s, f);
            }
            return s;
        }
        if (is_word("throw")) {
            advance();
            int s = internal("ThrowStatement");
            consume_expression_into(s);
            expect_semi();
            return s;
        }
        if (is_word("break") || is_word("continue")) {
            int s = internal(cur().text == "break" ? "BreakStatement" : "ContinueStatement");
            advance();
            if (is_kind(TokenKind::Identifier)) {
                attach(s, leaf(cur().text));
                advance();
            }
            expect_semi();
            return s;
        }
        if (is_word("synchronized")) {
            advance();
            int s = internal("SynchronizedStatement");
            attach(s, parse_paren_expression());
            attach(s, parse_block());
            return s;
        }
        if (is_word("assert")) {
            advance();
            int s = internal("AssertStatement");
            consume_expression_into(s);
            expect_semi();
            return s;
        }
        if (is_sep(";")) {
            advance();
            return internal("EmptyStatement");
        }
        return parse_declaration_or_expression();
    }

    int parse_declaration_or_expression() {
        // try a local variable declaration: [final] Type name (= ... | , | ;)
        size_t saved = pos_;
        size_t saved_nodes = tree_.nodes.size();
        bool has_final = is_word("final");
        if (has_final) advance();
        int type = try_parse_type();
        if (type >= 0 && is_kind(TokenKind::Identifier) && pos_ + 1 < toks_.size()) {
            const std::string& next = toks_[pos_ + 1].text;
            if (next == "=" || next == ";" || next == ",") {
                int s = internal("VariableDeclaration");
                if (has_final) attach(s, leaf("final"));
                // re-home the Type node under the declaration
                attach(s, type);
                consume_expression_into(s);
                expect_semi();
                return s;
            }
        }
        rollback(saved, saved_nodes);

        int s = internal("ExpressionStatement");
        consume_expression_into(s);
        expect_semi();
        return s;
    }

    int parse_paren_expression() {
        if (!is_sep("(")) fail("expected '('");
        int e = internal("Expression");
        consume_balanced_into(e, "(", ")");
        return e;
    }

    void expect_semi() {
        if (!is_sep(";")) fail("expected ';'");
        advance();
    }

    // Collects expression tokens (flat) until a ';' at bracket depth zero.
    void consume_expression_into(int node) {
        int depth = 0;
        while (pos_ < toks_.size()) {
            const CodeToken& t = cur();
            if (depth == 0 && t.kind == TokenKind::Separator && t.text == ";") return;
            if (t.kind == TokenKind::Separator &&
                (t.text == "(" || t.text == "[" || t.text == "{")) ++depth;
            if (t.kind == TokenKind::Separator &&
                (t.text == ")" || t.text == "]" || t.text == "}")) {
                if (depth == 0) fail("unbalanced bracket in expression");
                --depth;
            }
            consume_leaf_token(node);
        }
        fail("expression not terminated");
    }

    // Consumes "open ... close" keeping non-punctuation tokens as flat leaves.
    void consume_balanced_into(int node, std::string_view open, std::string_view close) {
        if (!is_sep(open)) fail("expected bracket");
        advance();
        int depth = 1;
        while (pos_ < toks_.size()) {
            const CodeToken& t = cur();
            if (t.kind == TokenKind::Separator) {
                if (t.text == open) ++depth;
                if (t.text == close && --depth == 0) { advance(); return; }
            }
            consume_leaf_token(node);
        }
        fail("unbalanced brackets");
    }

    // '<' ... '>' for type parameter declarations (handles glued '>>')
    void consume_gt_balanced_into(int node) {
        advance();   // '<'
        int depth = 1;
        while (pos_ < toks_.size()) {
            if (is_op("<")) ++depth;
            if (peek_gt()) {
                consume_gt();
                if (--depth == 0) return;
                continue;
            }
            consume_leaf_token(node);
        }
        fail("unbalanced '<' in type parameters");
    }

    // keeps identifiers/keywords/literals/operators, drops pure punctuation
    void consume_leaf_token(int node) {
        const CodeToken& t = cur();
        if (t.kind != TokenKind::Separator) attach(node, leaf(t.text));
        advance();
    }
};

}   // namespace

AstTree parse_method(std::string_view source) {
    std::vector<CodeToken> tokens;
    try {
        tokens = lex::tokenize_code(source);
    } catch (const lex::LexError& e) {
        throw ParseError(std::string("lex failure: ") + e.what());
    }
    return parse_method_tokens(tokens);
}

AstTree parse_method_tokens(const std::vector<CodeToken>& tokens) {
    return MethodParser(tokens).parse();
}

// ---------------------------------------------------------------------------
// GumTree-style differencing
// ---------------------------------------------------------------------------

namespace {

struct TreeIndex {
    const AstTree* tree = nullptr;
    std::vector<int> parent;
    std::vector<int> height;      // leaves have height 1
    std::vector<int> size;        // subtree sizes
    std::vector<uint64_t> fingerprint;
    std::vector<int> preorder;    // node ids in preorder
    std::vector<int> postorder;

    explicit TreeIndex(const AstTree& t) : tree(&t) {
        size_t n = t.nodes.size();
        parent.assign(n, -1);
        height.assign(n, 1);
        size.assign(n, 1);
        fingerprint.assign(n, 0);
        build(t.root);
    }

    void build(int id) {
        preorder.push_back(id);
        uint64_t h = 1469598103934665603ull;   // FNV offset
        for (char c : tree->node(id).label) h = (h ^ static_cast<uint8_t>(c)) * 1099511628211ull;
        h ^= 0x9e3779b97f4a7c15ull + tree->node(id).children.size();
        for (int c : tree->node(id).children) {
            parent[c] = id;
            build(c);
            height[id] = std::max(height[id], height[c] + 1);
            size[id] += size[c];
            // rotate so label and child contributions cannot commute
            h = ((h << 17) | (h >> 47)) ^ (fingerprint[c] * 1099511628211ull);
        }
        postorder.push_back(id);
        fingerprint[id] = h;
    }

    bool is_descendant(int node, int ancestor) const {
        for (int p = parent[node]; p != -1; p = parent[p])
            if (p == ancestor) return true;
        return false;
    }
};

class AstMatcher {
public:
    AstMatcher(const AstTree& t_old, const AstTree& t_new, const DiffOptions& opts)
        : old_(t_old), new_(t_new), iold_(t_old), inew_(t_new), opts_(opts) {
        old2new_.assign(t_old.nodes.size(), -1);
        new2old_.assign(t_new.nodes.size(), -1);
    }

    void run() {
        match_identical_subtrees();
        match_containers_bottom_up();
        if (old2new_[old_.root] == -1 && new2old_[new_.root] == -1)
            link(old_.root, new_.root);
        recover_children(old_.root);
    }

    const std::vector<int>& old2new() const { return old2new_; }
    const std::vector<int>& new2old() const { return new2old_; }

    bool moved(int old_id) const { return moved_.count(old_id) > 0; }

    void compute_moves() {
        for (int a : iold_.preorder) {
            int b = old2new_[a];
            if (b == -1) continue;
            int pa = iold_.parent[a];
            int pb = inew_.parent[b];
            if ((pa == -1) != (pb == -1)) { moved_.insert(a); continue; }
            if (pa != -1 && old2new_[pa] != pb) { moved_.insert(a); continue; }
        }
        // order changes among matched siblings
        for (int a : iold_.preorder) {
            int b = old2new_[a];
            if (b == -1) continue;
            mark_sibling_moves(a, b);
        }
    }

private:
    const AstTree& old_;
    const AstTree& new_;
    TreeIndex iold_;
    TreeIndex inew_;
    DiffOptions opts_;
    std::vector<int> old2new_;
    std::vector<int> new2old_;
    std::unordered_set<int> moved_;

    void link(int a, int b) {
        old2new_[a] = b;
        new2old_[b] = a;
    }

    // guards link_subtrees against fingerprint collisions
    bool structurally_identical(int a, int b) const {
        const AstNode& na = old_.node(a);
        const AstNode& nb = new_.node(b);
        if (na.label != nb.label || na.children.size() != nb.children.size())
            return false;
        for (size_t i = 0; i < na.children.size(); ++i)
            if (!structurally_identical(na.children[i], nb.children[i])) return false;
        return true;
    }

    void link_subtrees(int a, int b) {
        link(a, b);
        const auto& ca = old_.node(a).children;
        const auto& cb = new_.node(b).children;
        for (size_t i = 0; i < ca.size(); ++i)
            link_subtrees(ca[i], cb[i]);
    }

    void match_identical_subtrees() {
        // process open nodes grouped by height, tallest first
        std::map<int, std::vector<int>, std::greater<>> open_old, open_new;
        open_old[iold_.height[old_.root]].push_back(old_.root);
        open_new[inew_.height[new_.root]].push_back(new_.root);

        auto open_children = [](std::map<int, std::vector<int>, std::greater<>>& open,
                                const TreeIndex& idx, int id) {
            for (int c : idx.tree->node(id).children)
                open[idx.height[c]].push_back(c);
        };

        while (!open_old.empty() && !open_new.empty()) {
            int h1 = open_old.begin()->first;
            int h2 = open_new.begin()->first;
            // bare leaves carry too little context to anchor on; the
            // position-aware recovery pass pairs them instead
            if (h1 < 2 && h2 < 2) break;
            if (h1 > h2) {
                auto nodes = std::move(open_old.begin()->second);
                open_old.erase(open_old.begin());
                for (int id : nodes) open_children(open_old, iold_, id);
                continue;
            }
            if (h2 > h1) {
                auto nodes = std::move(open_new.begin()->second);
                open_new.erase(open_new.begin());
                for (int id : nodes) open_children(open_new, inew_, id);
                continue;
            }
            auto olds = std::move(open_old.begin()->second);
            auto news = std::move(open_new.begin()->second);
            open_old.erase(open_old.begin());
            open_new.erase(open_new.begin());

            std::map<uint64_t, std::pair<std::vector<int>, std::vector<int>>> groups;
            for (int id : olds) groups[iold_.fingerprint[id]].first.push_back(id);
            for (int id : news) groups[inew_.fingerprint[id]].second.push_back(id);

            for (auto& [fp, group] : groups) {
                auto& [go, gn] = group;
                if (go.size() == 1 && gn.size() == 1 &&
                    structurally_identical(go[0], gn[0])) {
                    link_subtrees(go[0], gn[0]);
                    continue;
                }
                // ambiguous group: defer to the order-aware recovery pass
                for (int id : go) open_children(open_old, iold_, id);
                for (int id : gn) open_children(open_new, inew_, id);
            }
        }
    }

    double dice(int a, int b) const {
        int denom = (iold_.size[a] - 1) + (inew_.size[b] - 1);
        if (denom == 0) return 0.0;
        int common = 0;
        count_mapped_into(a, b, common);
        return 2.0 * common / denom;
    }

    void count_mapped_into(int a, int b, int& common) const {
        for (int c : old_.node(a).children) {
            int m = old2new_[c];
            if (m != -1 && (m == b || inew_.is_descendant(m, b))) ++common;
            count_mapped_into(c, b, common);
        }
    }

    void match_containers_bottom_up() {
        for (int a : iold_.postorder) {
            if (old2new_[a] != -1 || old_.node(a).is_leaf) continue;
            int best = -1;
            double best_dice = opts_.bottomup_threshold;
            for (int b : inew_.preorder) {
                if (new2old_[b] != -1 || new_.node(b).is_leaf) continue;
                if (new_.node(b).label != old_.node(a).label) continue;
                double d = dice(a, b);
                if (d > best_dice) {
                    best_dice = d;
                    best = b;
                }
            }
            if (best != -1) link(a, best);
        }
    }

    /** Aligns the children of every matched pair, turning positionally paired
     *  label mismatches into replace pairs, then recurses. */
    void recover_children(int a) {
        int b = old2new_[a];
        if (b != -1 && !old_.node(a).is_leaf && !new_.node(b).is_leaf)
            align_children(a, b);
        for (int c : old_.node(a).children) recover_children(c);
    }

    void align_children(int a, int b) {
        const auto& ca = old_.node(a).children;
        const auto& cb = new_.node(b).children;
        const size_t n = ca.size(), m = cb.size();

        // weighted alignment: identical subtrees and established pairs score
        // highest, label-only pairs lowest, so a bare leaf never outbids the
        // same-label container it sits next to
        auto score = [&](int x, int y) -> uint32_t {
            if (old2new_[x] == y) return 6;
            if (old2new_[x] != -1 || new2old_[y] != -1) return 0;
            if (old_.node(x).label != new_.node(y).label) return 0;
            if (iold_.fingerprint[x] == inew_.fingerprint[y]) return 6;
            return old_.node(x).is_leaf == new_.node(y).is_leaf ? 3 : 2;
        };

        std::vector<uint32_t> dp((n + 1) * (m + 1), 0);
        auto at = [&](size_t i, size_t j) -> uint32_t& { return dp[i * (m + 1) + j]; };
        for (size_t i = n; i-- > 0;)
            for (size_t j = m; j-- > 0;) {
                uint32_t s = score(ca[i], cb[j]);
                uint32_t best = std::max(at(i + 1, j), at(i, j + 1));
                if (s > 0) best = std::max(best, at(i + 1, j + 1) + s);
                at(i, j) = best;
            }

        std::vector<int> gap_old, gap_new;
        auto flush_gap = [&]() { pair_gap(gap_old, gap_new); };

        size_t i = 0, j = 0;
        while (i < n || j < m) {
            uint32_t s = (i < n && j < m) ? score(ca[i], cb[j]) : 0;
            if (s > 0 && at(i, j) == at(i + 1, j + 1) + s) {
                flush_gap();
                if (old2new_[ca[i]] == -1) link(ca[i], cb[j]);
                ++i, ++j;
            } else if (i < n && (j == m || at(i + 1, j) > at(i, j + 1))) {
                if (old2new_[ca[i]] == -1) gap_old.push_back(ca[i]);
                ++i;
            } else {
                if (new2old_[cb[j]] == -1) gap_new.push_back(cb[j]);
                ++j;
            }
        }
        flush_gap();
    }

    /** Pairs leftover unmatched children of a matched parent as replace
     *  candidates, preferring pairs whose subtrees share the most labels and
     *  falling back to position. */
    void pair_gap(std::vector<int>& gap_old, std::vector<int>& gap_new) {
        if (!gap_old.empty() && !gap_new.empty()) {
            auto label_bag = [](const AstTree& t, int root) {
                std::map<std::string, int> bag;
                auto walk = [&](auto&& self, int id) -> void {
                    for (int c : t.node(id).children) {
                        ++bag[t.node(c).label];
                        self(self, c);
                    }
                };
                walk(walk, root);
                return bag;
            };
            std::vector<std::map<std::string, int>> bags_old, bags_new;
            for (int x : gap_old) bags_old.push_back(label_bag(old_, x));
            for (int y : gap_new) bags_new.push_back(label_bag(new_, y));
            auto overlap = [](const std::map<std::string, int>& a,
                              const std::map<std::string, int>& b) {
                int n = 0;
                for (const auto& [k, v] : a) {
                    auto it = b.find(k);
                    if (it != b.end()) n += std::min(v, it->second);
                }
                return n;
            };

            std::vector<bool> used_old(gap_old.size()), used_new(gap_new.size());
            size_t pairs = std::min(gap_old.size(), gap_new.size());
            for (size_t p = 0; p < pairs; ++p) {
                int best_i = -1, best_j = -1, best_sim = -1;
                for (size_t i = 0; i < gap_old.size(); ++i) {
                    if (used_old[i]) continue;
                    for (size_t j = 0; j < gap_new.size(); ++j) {
                        if (used_new[j]) continue;
                        int sim = overlap(bags_old[i], bags_new[j]);
                        if (sim > best_sim) {
                            best_sim = sim;
                            best_i = static_cast<int>(i);
                            best_j = static_cast<int>(j);
                        }
                    }
                }
                used_old[static_cast<size_t>(best_i)] = true;
                used_new[static_cast<size_t>(best_j)] = true;
                link(gap_old[static_cast<size_t>(best_i)],
                     gap_new[static_cast<size_t>(best_j)]);
            }
        }
        gap_old.clear();
        gap_new.clear();
    }

    void mark_sibling_moves(int a, int b) {
        // children of a mapped into children of b, checked for order preservation
        const auto& ca = old_.node(a).children;
        const auto& cb = new_.node(b).children;
        std::unordered_map<int, int> pos_in_b;
        for (size_t j = 0; j < cb.size(); ++j) pos_in_b[cb[j]] = static_cast<int>(j);

        std::vector<int> kids, positions;
        for (int c : ca) {
            int m = old2new_[c];
            if (m == -1) continue;
            auto it = pos_in_b.find(m);
            if (it == pos_in_b.end()) continue;   // reparented, handled already
            kids.push_back(c);
            positions.push_back(it->second);
        }
        // longest increasing subsequence keeps its members; the rest moved
        const size_t k = positions.size();
        std::vector<int> lis_len(k, 1), prev(k, -1);
        size_t best = 0;
        for (size_t x = 0; x < k; ++x) {
            for (size_t y = 0; y < x; ++y)
                if (positions[y] < positions[x] && lis_len[y] + 1 > lis_len[x]) {
                    lis_len[x] = lis_len[y] + 1;
                    prev[x] = static_cast<int>(y);
                }
            if (lis_len[x] > lis_len[best]) best = x;
        }
        std::vector<bool> in_lis(k, false);
        if (k > 0)
            for (int x = static_cast<int>(best); x != -1; x = prev[x]) in_lis[x] = true;
        for (size_t x = 0; x < k; ++x)
            if (!in_lis[x]) moved_.insert(kids[x]);
    }
};

void add_parent_child(DiffAstGraph& g, int parent, int child) {
    g.edges.push_back({child, parent, EdgeType::Parent});
    g.edges.push_back({parent, child, EdgeType::Child});
}

}   // namespace

TreeMatching match_trees(const AstTree& t_old, const AstTree& t_new,
                         const DiffOptions& options) {
    AstMatcher matcher(t_old, t_new, options);
    matcher.run();
    matcher.compute_moves();
    TreeMatching m;
    m.old_to_new = matcher.old2new();
    m.new_to_old = matcher.new2old();
    m.old_moved.assign(t_old.nodes.size(), false);
    for (size_t i = 0; i < t_old.nodes.size(); ++i)
        m.old_moved[i] = matcher.moved(static_cast<int>(i));
    return m;
}

DiffAstGraph diff_asts(const AstTree& t_old, const AstTree& t_new,
                       const DiffOptions& options) {
    AstMatcher matcher(t_old, t_new, options);
    matcher.run();
    matcher.compute_moves();
    const auto& old2new = matcher.old2new();
    const auto& new2old = matcher.new2old();

    DiffAstGraph g;
    std::vector<int> uid_new(t_new.nodes.size(), -1);
    std::vector<int> uid_old(t_old.nodes.size(), -1);

    auto make_node = [&g](const std::string& label, bool is_leaf, NodeEdit edit) {
        int id = static_cast<int>(g.nodes.size());
        g.nodes.push_back(DiffNode{id, label, is_leaf, edit});
        return id;
    };

    TreeIndex inew(t_new);
    TreeIndex iold(t_old);

    for (int b : inew.preorder) {
        const AstNode& node = t_new.node(b);
        int a = new2old[b];
        if (a == -1) {
            uid_new[b] = make_node(node.label, node.is_leaf, NodeEdit::Insert);
        } else if (t_old.node(a).label != node.label) {
            uid_new[b] = make_node(node.label, node.is_leaf, NodeEdit::ReplaceNew);
        } else {
            NodeEdit e = matcher.moved(a) ? NodeEdit::Move : NodeEdit::Keep;
            uid_new[b] = make_node(node.label, node.is_leaf, e);
            uid_old[a] = uid_new[b];   // consolidated
        }
    }
    for (int a : iold.preorder) {
        if (uid_old[a] != -1) continue;
        const AstNode& node = t_old.node(a);
        int b = old2new[a];
        NodeEdit e = (b == -1) ? NodeEdit::Delete : NodeEdit::ReplaceOld;
        uid_old[a] = make_node(node.label, node.is_leaf, e);
    }

    // parent/child edges follow the new tree for Keep/Move/Insert/ReplaceNew
    // nodes and the old tree for Delete/ReplaceOld nodes
    for (int b : inew.preorder) {
        int p = inew.parent[b];
        if (p != -1) add_parent_child(g, uid_new[p], uid_new[b]);
    }
    for (int a : iold.preorder) {
        NodeEdit e = g.nodes[uid_old[a]].edit;
        if (e != NodeEdit::Delete && e != NodeEdit::ReplaceOld) continue;
        int p = iold.parent[a];
        if (p != -1) add_parent_child(g, uid_old[p], uid_old[a]);
    }
    for (size_t a = 0; a < t_old.nodes.size(); ++a) {
        int b = old2new[a];
        if (b == -1) continue;
        if (g.nodes[uid_old[a]].edit == NodeEdit::ReplaceOld) {
            g.edges.push_back({uid_old[a], uid_new[b], EdgeType::Aligned});
            g.edges.push_back({uid_new[b], uid_old[a], EdgeType::Aligned});
        }
    }
    return g;
}

DiffAstGraph plain_graph(const AstTree& tree) {
    DiffAstGraph g;
    g.nodes.reserve(tree.nodes.size());
    TreeIndex idx(tree);
    std::vector<int> uid(tree.nodes.size(), -1);
    for (int id : idx.preorder) {
        const AstNode& node = tree.node(id);
        uid[id] = static_cast<int>(g.nodes.size());
        g.nodes.push_back(DiffNode{uid[id], node.label, node.is_leaf, NodeEdit::Keep});
    }
    for (int id : idx.preorder) {
        int p = idx.parent[id];
        if (p != -1) add_parent_child(g, uid[p], uid[id]);
    }
    return g;
}

DiffAstGraph add_subtoken_nodes(DiffAstGraph graph) {
    const size_t original = graph.nodes.size();
    for (size_t i = 0; i < original; ++i) {
        const DiffNode node = graph.nodes[i];
        if (!node.is_leaf || !lex::looks_like_identifier(node.label)) continue;
        std::vector<std::string> subs = lex::subtokenize(node.label);
        if (subs.size() < 2) continue;
        int prev = -1;
        for (const std::string& s : subs) {
            int id = static_cast<int>(graph.nodes.size());
            graph.nodes.push_back(DiffNode{id, s, true, node.edit});
            graph.edges.push_back({node.id, id, EdgeType::Subnode});
            graph.edges.push_back({id, node.id, EdgeType::Supernode});
            if (prev != -1) {
                graph.edges.push_back({prev, id, EdgeType::NextSubnode});
                graph.edges.push_back({id, prev, EdgeType::PrevSubnode});
            }
            prev = id;
        }
    }
    return graph;
}

AstTree ast_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    AstTree tree;
    tree.root = j.at("root").get<int>();
    const auto& nodes = j.at("nodes");
    tree.nodes.resize(nodes.size());
    for (const auto& nj : nodes) {
        AstNode node;
        node.id = nj.at("id").get<int>();
        node.label = nj.at("label").get<std::string>();
        node.is_leaf = nj.at("is_leaf").get<bool>();
        node.children = nj.at("children").get<std::vector<int>>();
        if (node.id < 0 || node.id >= static_cast<int>(tree.nodes.size()))
            throw ParseError("ast json: node id out of range");
        tree.nodes[static_cast<size_t>(node.id)] = std::move(node);
    }
    if (tree.root < 0 || tree.root >= static_cast<int>(tree.nodes.size()))
        throw ParseError("ast json: root out of range");
    return tree;
}

std::string ast_to_json(const AstTree& tree) {
    nlohmann::json j;
    j["root"] = tree.root;
    j["nodes"] = nlohmann::json::array();
    for (const AstNode& n : tree.nodes) {
        j["nodes"].push_back({{"id", n.id},
                              {"label", n.label},
                              {"is_leaf", n.is_leaf},
                              {"children", n.children}});
    }
    return j.dump();
}

namespace {

void collect_leaves(const AstTree& t, int id, std::vector<std::string>& out) {
    const AstNode& n = t.node(id);
    if (n.is_leaf) {
        out.push_back(n.label);
        return;
    }
    for (int c : n.children) collect_leaves(t, c, out);
}

void collect_return_statements(const AstTree& t, int id,
                               std::vector<std::vector<std::string>>& out) {
    const AstNode& n = t.node(id);
    if (n.label == "ReturnStatement" && !n.is_leaf) {
        std::vector<std::string> leaves;
        collect_leaves(t, id, leaves);
        out.push_back(std::move(leaves));
        return;
    }
    for (int c : n.children) collect_return_statements(t, c, out);
}

}   // namespace

MethodShape method_shape(const AstTree& tree) {
    MethodShape shape;
    const AstNode& root = tree.node(tree.root);
    int type_pos = -1;
    for (size_t i = 0; i < root.children.size(); ++i) {
        const AstNode& child = tree.node(root.children[i]);
        if (child.label == "Type" && !child.is_leaf) {
            type_pos = static_cast<int>(i);
            for (int c : child.children) {
                if (tree.node(c).is_leaf)
                    shape.return_type_tokens.push_back(tree.node(c).label);
            }
            collect_leaves(tree, root.children[i], shape.full_return_type_tokens);
            break;
        }
    }
    if (type_pos != -1 && type_pos + 1 < static_cast<int>(root.children.size())) {
        const AstNode& name = tree.node(root.children[static_cast<size_t>(type_pos) + 1]);
        if (name.is_leaf) shape.name = name.label;
    }
    for (int child : root.children) {
        if (tree.node(child).label != "FormalParameters") continue;
        for (int p : tree.node(child).children) {
            const AstNode& param = tree.node(p);
            if (param.label != "FormalParameter") continue;
            MethodShape::Param out;
            for (int c : param.children) {
                const AstNode& pc = tree.node(c);
                if (pc.label == "Type" && !pc.is_leaf && out.type_tokens.empty())
                    collect_leaves(tree, c, out.type_tokens);
                else if (pc.is_leaf)
                    out.name = pc.label;   // last leaf is the parameter name
            }
            shape.parameters.push_back(std::move(out));
        }
    }
    collect_return_statements(tree, tree.root, shape.return_statements);
    return shape;
}

const char* to_string(NodeEdit e) {
    switch (e) {
        case NodeEdit::Keep: return "keep";
        case NodeEdit::Insert: return "insert";
        case NodeEdit::Delete: return "delete";
        case NodeEdit::ReplaceOld: return "replace_old";
        case NodeEdit::ReplaceNew: return "replace_new";
        case NodeEdit::Move: return "move";
    }
    return "?";
}

const char* to_string(EdgeType t) {
    switch (t) {
        case EdgeType::Parent: return "parent";
        case EdgeType::Child: return "child";
        case EdgeType::Subnode: return "subnode";
        case EdgeType::Supernode: return "supernode";
        case EdgeType::NextSubnode: return "next_subnode";
        case EdgeType::PrevSubnode: return "prev_subnode";
        case EdgeType::Aligned: return "aligned";
    }
    return "?";
}

}   // namespace jitid::astdiff
