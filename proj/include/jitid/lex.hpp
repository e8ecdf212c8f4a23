#ifndef JITID_LEX_HPP
#define JITID_LEX_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jitid::lex {

enum class TokenKind { Identifier, Keyword, Operator, Separator, Literal };

struct CodeToken {
    std::string text;
    TokenKind kind;
    int position;   // 0-based index in the method token stream

    bool operator==(const CodeToken&) const = default;
};

class LexError : public std::runtime_error {
public:
    LexError(const std::string& what, size_t offset)
        : std::runtime_error(what), offset(offset) {}
    size_t offset;
};

/** Tokenizes the source of a single Java-like method declaration.
 *
 *  String/char literals come out as single Literal tokens, comments inside
 *  the method are stripped. Throws LexError on unterminated literals,
 *  illegal characters, or source that yields no tokens at all.
 */
std::vector<CodeToken> tokenize_code(std::string_view source);

/** Splits an identifier into lower-cased subtokens.
 *
 *  Split points: non-alphanumeric separators (dropped), lowercase-to-uppercase
 *  transitions, and letter/digit boundaries. Digit runs become their own
 *  subtokens ("utf8Name" -> utf, 8, name). A token with no alphanumeric
 *  content is returned as a lower-cased singleton.
 */
std::vector<std::string> subtokenize(std::string_view token);

enum class CommentType { Return, Param, Summary };

struct Subtoken {
    std::string text;     // lower-cased
    int parent_index;     // index of the originating comment token

    bool operator==(const Subtoken&) const = default;
};

struct CommentTokenSeq {
    std::vector<Subtoken> subtokens;
    CommentType comment_type;
    std::optional<std::string> param_name;   // present iff comment_type == Param

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(subtokens.size());
        for (const Subtoken& s : subtokens) out.push_back(s.text);
        return out;
    }
};

class EmptyComment : public std::runtime_error {
public:
    explicit EmptyComment(const std::string& what) : std::runtime_error(what) {}
};

/** Tokenizes a raw comment string (tag markers like "@param" still present).
 *
 *  Splits on whitespace and punctuation; sentence punctuation is kept as its
 *  own token, the "@" tag sigil is dropped. Each word is then subtokenized
 *  and lower-cased. Throws EmptyComment if nothing survives.
 */
CommentTokenSeq tokenize_comment(std::string_view text, CommentType type,
                                 std::optional<std::string> param_name = std::nullopt);

/** Lower-cased subtoken stream for a whole method: identifiers are split,
 *  keywords/operators/separators pass through, literals stay atomic. */
std::vector<std::string> code_subtokens(const std::vector<CodeToken>& tokens);

bool is_java_keyword(std::string_view word);
bool looks_like_identifier(std::string_view text);

const char* to_string(TokenKind kind);
const char* to_string(CommentType type);
CommentType comment_type_from_string(std::string_view s);

}   // namespace jitid::lex

#endif
