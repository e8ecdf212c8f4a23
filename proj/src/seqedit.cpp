#include "jitid/seqedit.hpp"

#include <array>

namespace jitid::seqedit {

EditScript compute_edit_script(std::span<const std::string> old_tokens,
                               std::span<const std::string> new_tokens) {
    const size_t n = old_tokens.size();
    const size_t m = new_tokens.size();

    // dp[i][j] = edit distance (insert/delete only) between old[i..) and new[j..)
    std::vector<uint32_t> dp((n + 1) * (m + 1));
    auto at = [&](size_t i, size_t j) -> uint32_t& { return dp[i * (m + 1) + j]; };
    for (size_t j = 0; j <= m; ++j) at(n, j) = static_cast<uint32_t>(m - j);
    for (size_t i = 0; i <= n; ++i) at(i, m) = static_cast<uint32_t>(n - i);
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            if (old_tokens[i] == new_tokens[j])
                at(i, j) = at(i + 1, j + 1);
            else
                at(i, j) = 1 + std::min(at(i + 1, j), at(i, j + 1));
        }
    }

    // raw per-token actions from the backtrace (Keep > Delete > Insert)
    std::vector<std::pair<Action, const std::string*>> raw;
    raw.reserve(n + m);
    size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && old_tokens[i] == new_tokens[j]) {
            raw.emplace_back(Action::Keep, &old_tokens[i]);
            ++i, ++j;
        } else if (i < n && (j == m || at(i + 1, j) <= at(i, j + 1))) {
            raw.emplace_back(Action::Delete, &old_tokens[i]);
            ++i;
        } else {
            raw.emplace_back(Action::Insert, &new_tokens[j]);
            ++j;
        }
    }

    // merge runs; a Delete run directly followed by an Insert run becomes a
    // ReplaceOld/ReplaceNew pair regardless of the length asymmetry
    EditScript script;
    script.old_len = n;
    script.new_len = m;
    size_t k = 0;
    while (k < raw.size()) {
        Action act = raw[k].first;
        std::vector<std::string> span;
        while (k < raw.size() && raw[k].first == act) {
            span.push_back(*raw[k].second);
            ++k;
        }
        if (act == Action::Delete && k < raw.size() && raw[k].first == Action::Insert) {
            std::vector<std::string> added;
            while (k < raw.size() && raw[k].first == Action::Insert) {
                added.push_back(*raw[k].second);
                ++k;
            }
            script.actions.push_back({Action::ReplaceOld, std::move(span)});
            script.actions.push_back({Action::ReplaceNew, std::move(added)});
        } else {
            script.actions.push_back({act, std::move(span)});
        }
    }
    return script;
}

std::vector<std::string> apply_edit_script(std::span<const std::string> old_tokens,
                                           const EditScript& script) {
    if (script.old_len != old_tokens.size())
        throw ScriptMismatch("old stream length does not match script");

    std::vector<std::string> out;
    out.reserve(script.new_len);
    size_t cursor = 0;
    auto consume_old = [&](const EditSpan& span) {
        for (const std::string& tok : span.tokens) {
            if (cursor >= old_tokens.size() || old_tokens[cursor] != tok)
                throw ScriptMismatch("span does not align with old stream at token " +
                                     std::to_string(cursor));
            ++cursor;
        }
    };

    for (const EditSpan& span : script.actions) {
        switch (span.action) {
            case Action::Keep:
                consume_old(span);
                out.insert(out.end(), span.tokens.begin(), span.tokens.end());
                break;
            case Action::Delete:
            case Action::ReplaceOld:
                consume_old(span);
                break;
            case Action::Insert:
            case Action::ReplaceNew:
                out.insert(out.end(), span.tokens.begin(), span.tokens.end());
                break;
        }
    }
    if (cursor != old_tokens.size())
        throw ScriptMismatch("script does not consume the whole old stream");
    return out;
}

EditScript method_edit_script(const std::vector<lex::CodeToken>& old_tokens,
                              const std::vector<lex::CodeToken>& new_tokens) {
    std::vector<std::string> old_texts, new_texts;
    old_texts.reserve(old_tokens.size());
    new_texts.reserve(new_tokens.size());
    for (const auto& t : old_tokens) old_texts.push_back(t.text);
    for (const auto& t : new_tokens) new_texts.push_back(t.text);
    EditScript token_script = compute_edit_script(old_texts, new_texts);

    // re-render every span's tokens as subtokens, tracking both cursors
    auto expand = [](const std::vector<lex::CodeToken>& toks, size_t& cursor,
                     size_t count) {
        std::vector<lex::CodeToken> slice(toks.begin() + static_cast<long>(cursor),
                                          toks.begin() + static_cast<long>(cursor + count));
        cursor += count;
        return lex::code_subtokens(slice);
    };

    EditScript out;
    size_t old_cur = 0, new_cur = 0;
    for (EditSpan& span : token_script.actions) {
        std::vector<std::string> subs;
        switch (span.action) {
            case Action::Keep:
                subs = expand(old_tokens, old_cur, span.tokens.size());
                new_cur += span.tokens.size();
                break;
            case Action::Delete:
            case Action::ReplaceOld:
                subs = expand(old_tokens, old_cur, span.tokens.size());
                break;
            case Action::Insert:
            case Action::ReplaceNew:
                subs = expand(new_tokens, new_cur, span.tokens.size());
                break;
        }
        out.old_len += (span.action == Action::Keep || span.action == Action::Delete ||
                        span.action == Action::ReplaceOld)
                           ? subs.size() : 0;
        out.new_len += (span.action == Action::Keep || span.action == Action::Insert ||
                        span.action == Action::ReplaceNew)
                           ? subs.size() : 0;
        out.actions.push_back({span.action, std::move(subs)});
    }
    return out;
}

std::vector<std::string> linearize(const EditScript& script) {
    std::vector<std::string> out;
    for (const EditSpan& span : script.actions) {
        out.push_back(action_keyword(span.action));
        out.insert(out.end(), span.tokens.begin(), span.tokens.end());
    }
    return out;
}

const std::string& action_keyword(Action a) {
    static const std::array<std::string, 5> keywords = {
        "<INSERT>", "<DELETE>", "<KEEP>", "<REPLACE_OLD>", "<REPLACE_NEW>",
    };
    return keywords[static_cast<size_t>(a)];
}

const char* to_string(Action a) {
    switch (a) {
        case Action::Insert: return "insert";
        case Action::Delete: return "delete";
        case Action::Keep: return "keep";
        case Action::ReplaceOld: return "replace_old";
        case Action::ReplaceNew: return "replace_new";
    }
    return "?";
}

}   // namespace jitid::seqedit
