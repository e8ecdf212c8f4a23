#include "jitid/features.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_set>

namespace jitid::features {

namespace {

const std::unordered_set<std::string>& determiners() {
    static const std::unordered_set<std::string> words = {
        "a", "an", "the", "this", "that", "these", "those", "each", "every",
        "any", "all", "some", "no", "its",
    };
    return words;
}

const std::unordered_set<std::string>& common_verbs() {
    static const std::unordered_set<std::string> words = {
        "is", "are", "was", "be", "been", "has", "have", "can", "will",
        "get", "gets", "set", "sets", "return", "returns", "create", "creates",
        "check", "checks", "add", "adds", "remove", "removes", "build", "builds",
        "compute", "computes", "find", "finds", "take", "takes", "give", "gives",
        "use", "uses", "make", "makes", "call", "calls", "contain", "contains",
        "update", "updates", "read", "reads", "write", "writes", "parse", "parses",
        "convert", "converts", "determine", "determines", "indicate", "indicates",
        "perform", "performs", "look", "looks", "test", "tests", "hold", "holds",
    };
    return words;
}

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "an", "the", "of", "to", "in", "on", "for", "and", "or", "as",
        "at", "by", "with", "from", "is", "are", "was", "be", "it", "this",
        "that", "if", "not", "will", "can", "which", "its", "into", "when",
        "than", "then", "there", "but", "so", "no", "do", "does", "has",
        "have", "had", "we", "you", "they", "i",
    };
    return words;
}

bool ends_with(const std::string& w, const char* suffix) {
    std::string_view s(suffix);
    return w.size() > s.size() && std::string_view(w).substr(w.size() - s.size()) == s;
}

bool alphabetic(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char c) {
        return std::isalpha(c);
    });
}

size_t action_index(seqedit::Action a) {
    switch (a) {
        case seqedit::Action::Keep: return 0;
        case seqedit::Action::Insert: return 1;
        case seqedit::Action::Delete: return 2;
        case seqedit::Action::ReplaceOld: return 3;
        case seqedit::Action::ReplaceNew: return 4;
    }
    return 0;
}

size_t node_edit_index(astdiff::NodeEdit e) {
    switch (e) {
        case astdiff::NodeEdit::Keep: return 0;
        case astdiff::NodeEdit::Insert: return 1;
        case astdiff::NodeEdit::Delete: return 2;
        case astdiff::NodeEdit::ReplaceOld: return 3;
        case astdiff::NodeEdit::ReplaceNew: return 4;
        case astdiff::NodeEdit::Move: return 5;
    }
    return 0;
}

size_t kind_index(lex::TokenKind k) {
    switch (k) {
        case lex::TokenKind::Identifier: return 0;
        case lex::TokenKind::Keyword: return 1;
        case lex::TokenKind::Operator: return 2;
        case lex::TokenKind::Separator: return 3;
        case lex::TokenKind::Literal: return 4;
    }
    return 0;
}

/** Per-token flags on a raw method stream: inside the signature (before the
 *  first top-level '{') and inside a return statement. */
struct TokenFlags {
    std::vector<bool> in_signature;
    std::vector<bool> in_return;
    std::vector<lex::TokenKind> kinds;
};

TokenFlags token_flags(const std::vector<lex::CodeToken>& tokens) {
    TokenFlags f;
    f.in_signature.resize(tokens.size(), false);
    f.in_return.resize(tokens.size(), false);
    f.kinds.resize(tokens.size());
    bool seen_body = false;
    bool in_return = false;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        f.kinds[i] = t.kind;
        if (!seen_body && t.kind == lex::TokenKind::Separator && t.text == "{")
            seen_body = true;
        f.in_signature[i] = !seen_body;
        if (t.kind == lex::TokenKind::Keyword && t.text == "return") in_return = true;
        f.in_return[i] = in_return;
        if (t.kind == lex::TokenKind::Separator && t.text == ";") in_return = false;
    }
    return f;
}

/** Expands per-token flags to per-subtoken flags, mirroring code_subtokens. */
template <typename T>
std::vector<T> expand_to_subtokens(const std::vector<lex::CodeToken>& tokens,
                                   const std::vector<T>& per_token) {
    std::vector<T> out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        size_t n = tokens[i].kind == lex::TokenKind::Identifier
                       ? lex::subtokenize(tokens[i].text).size()
                       : 1;
        for (size_t k = 0; k < n; ++k) out.push_back(per_token[i]);
    }
    return out;
}

}   // namespace

PosTag pos_tag(const std::string& word) {
    if (determiners().count(word)) return PosTag::Det;
    if (common_verbs().count(word)) return PosTag::Verb;
    if (!alphabetic(word)) return PosTag::Other;
    if (ends_with(word, "ing") || ends_with(word, "ed") || ends_with(word, "ify") ||
        ends_with(word, "ize"))
        return PosTag::Verb;
    if (ends_with(word, "able") || ends_with(word, "ible") || ends_with(word, "ful") ||
        ends_with(word, "ous") || ends_with(word, "ive") || ends_with(word, "al") ||
        ends_with(word, "ant"))
        return PosTag::Adj;
    return PosTag::Noun;
}

bool is_stopword(const std::string& word) { return stopwords().count(word) > 0; }

std::vector<std::vector<double>> comment_features(
    const lex::CommentTokenSeq& comment, const std::vector<std::string>& old_subtokens,
    const std::vector<std::string>& new_subtokens, const seqedit::EditScript& script,
    const astdiff::MethodShape& new_shape) {
    std::set<std::string> in_old(old_subtokens.begin(), old_subtokens.end());
    std::set<std::string> in_new(new_subtokens.begin(), new_subtokens.end());
    std::set<std::string> deleted, inserted;
    for (const auto& span : script.actions) {
        if (span.action == seqedit::Action::Delete ||
            span.action == seqedit::Action::ReplaceOld)
            deleted.insert(span.tokens.begin(), span.tokens.end());
        if (span.action == seqedit::Action::Insert ||
            span.action == seqedit::Action::ReplaceNew)
            inserted.insert(span.tokens.begin(), span.tokens.end());
    }
    std::set<std::string> return_type, param_names;
    for (const auto& tok : new_shape.full_return_type_tokens)
        for (const auto& sub : lex::subtokenize(tok)) return_type.insert(sub);
    for (const auto& p : new_shape.parameters)
        for (const auto& sub : lex::subtokenize(p.name)) param_names.insert(sub);

    std::vector<std::vector<double>> out;
    out.reserve(comment.subtokens.size());
    for (const auto& sub : comment.subtokens) {
        std::vector<double> f(kCommentFeatureWidth, 0.0);
        f[0] = in_old.count(sub.text) ? 1.0 : 0.0;
        f[1] = in_new.count(sub.text) ? 1.0 : 0.0;
        f[2] = deleted.count(sub.text) ? 1.0 : 0.0;
        f[3] = inserted.count(sub.text) ? 1.0 : 0.0;
        f[4 + static_cast<size_t>(pos_tag(sub.text))] = 1.0;
        f[9] = is_stopword(sub.text) ? 1.0 : 0.0;
        f[10] = return_type.count(sub.text) ? 1.0 : 0.0;
        f[11] = param_names.count(sub.text) ? 1.0 : 0.0;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::vector<double>> sequence_features(
    const seqedit::EditScript& script, const std::vector<lex::CodeToken>& old_tokens,
    const std::vector<lex::CodeToken>& new_tokens,
    const lex::CommentTokenSeq& comment) {
    std::set<std::string> comment_set;
    for (const auto& s : comment.subtokens) comment_set.insert(s.text);

    TokenFlags of = token_flags(old_tokens);
    TokenFlags nf = token_flags(new_tokens);
    auto old_sig = expand_to_subtokens(old_tokens, of.in_signature);
    auto old_ret = expand_to_subtokens(old_tokens, of.in_return);
    auto old_kind = expand_to_subtokens(old_tokens, of.kinds);
    auto new_sig = expand_to_subtokens(new_tokens, nf.in_signature);
    auto new_ret = expand_to_subtokens(new_tokens, nf.in_return);
    auto new_kind = expand_to_subtokens(new_tokens, nf.kinds);

    std::vector<std::vector<double>> out;
    size_t old_cur = 0, new_cur = 0;
    for (const auto& span : script.actions) {
        std::vector<double> keyword_row(kSeqFeatureWidth, 0.0);
        keyword_row[action_index(span.action)] = 1.0;
        out.push_back(keyword_row);

        bool from_old = span.action == seqedit::Action::Delete ||
                        span.action == seqedit::Action::ReplaceOld;
        bool keep = span.action == seqedit::Action::Keep;
        for (const auto& tok : span.tokens) {
            std::vector<double> f(kSeqFeatureWidth, 0.0);
            f[action_index(span.action)] = 1.0;
            f[5] = comment_set.count(tok) ? 1.0 : 0.0;
            size_t cur = (from_old || keep) ? old_cur : new_cur;
            const auto& kinds = (from_old || keep) ? old_kind : new_kind;
            const auto& sig = (from_old || keep) ? old_sig : new_sig;
            const auto& ret = (from_old || keep) ? old_ret : new_ret;
            if (cur < kinds.size()) {
                f[6 + kind_index(kinds[cur])] = 1.0;
                f[11] = ret[cur] ? 1.0 : 0.0;
                f[12] = sig[cur] ? 1.0 : 0.0;
            }
            if (from_old || keep) ++old_cur;
            if (!from_old) ++new_cur;
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<std::vector<double>> plain_sequence_features(
    const std::vector<lex::CodeToken>& tokens, const lex::CommentTokenSeq& comment) {
    std::set<std::string> comment_set;
    for (const auto& s : comment.subtokens) comment_set.insert(s.text);

    TokenFlags flags = token_flags(tokens);
    auto sig = expand_to_subtokens(tokens, flags.in_signature);
    auto ret = expand_to_subtokens(tokens, flags.in_return);
    auto kind = expand_to_subtokens(tokens, flags.kinds);
    std::vector<std::string> subs = lex::code_subtokens(tokens);

    std::vector<std::vector<double>> out;
    out.reserve(subs.size());
    for (size_t i = 0; i < subs.size(); ++i) {
        std::vector<double> f(kSeqFeatureWidth, 0.0);
        f[0] = 1.0;   // keep
        f[5] = comment_set.count(subs[i]) ? 1.0 : 0.0;
        f[6 + kind_index(kind[i])] = 1.0;
        f[11] = ret[i] ? 1.0 : 0.0;
        f[12] = sig[i] ? 1.0 : 0.0;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::vector<double>> node_features(const astdiff::DiffAstGraph& graph,
                                               const lex::CommentTokenSeq& comment) {
    std::set<std::string> comment_set;
    for (const auto& s : comment.subtokens) comment_set.insert(s.text);

    // parent chain per node (first Parent edge wins; trees guarantee one)
    std::vector<int> parent(graph.nodes.size(), -1);
    for (const auto& e : graph.edges)
        if (e.type == astdiff::EdgeType::Parent && parent[static_cast<size_t>(e.src)] == -1)
            parent[static_cast<size_t>(e.src)] = e.dst;

    auto has_ancestor = [&](int id, const char* label, bool stop_at_block) {
        for (int p = parent[static_cast<size_t>(id)]; p != -1;
             p = parent[static_cast<size_t>(p)]) {
            const auto& node = graph.nodes[static_cast<size_t>(p)];
            if (node.label == label) return true;
            if (stop_at_block && node.label == "Block") return false;
        }
        return false;
    };

    std::vector<std::vector<double>> out;
    out.reserve(graph.nodes.size());
    for (const auto& node : graph.nodes) {
        std::vector<double> f(kNodeFeatureWidth, 0.0);
        f[node_edit_index(node.edit)] = 1.0;
        std::string lowered = node.label;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        f[6] = node.is_leaf && comment_set.count(lowered) ? 1.0 : 0.0;
        if (node.is_leaf) {
            lex::TokenKind kind = lex::TokenKind::Identifier;
            if (lex::is_java_keyword(node.label)) kind = lex::TokenKind::Keyword;
            else if (lex::looks_like_identifier(node.label)) kind = lex::TokenKind::Identifier;
            else if (std::isdigit(static_cast<unsigned char>(node.label[0])) ||
                     node.label[0] == '"' || node.label[0] == '\'')
                kind = lex::TokenKind::Literal;
            else kind = lex::TokenKind::Operator;
            f[7 + kind_index(kind)] = 1.0;
        }
        f[12] = has_ancestor(node.id, "ReturnStatement", false) ||
                        node.label == "ReturnStatement"
                    ? 1.0
                    : 0.0;
        bool under_block = has_ancestor(node.id, "Block", false) || node.label == "Block";
        f[13] = under_block ? 0.0 : 1.0;
        out.push_back(std::move(f));
    }
    return out;
}

}   // namespace jitid::features
