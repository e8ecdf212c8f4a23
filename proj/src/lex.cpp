#include "jitid/lex.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace jitid::lex {

namespace {

const std::unordered_set<std::string_view>& keyword_set() {
    static const std::unordered_set<std::string_view> kw = {
        "abstract", "assert", "boolean", "break", "byte", "case", "catch",
        "char", "class", "const", "continue", "default", "do", "double",
        "else", "enum", "extends", "final", "finally", "float", "for",
        "goto", "if", "implements", "import", "instanceof", "int",
        "interface", "long", "native", "new", "package", "private",
        "protected", "public", "return", "short", "static", "strictfp",
        "super", "switch", "synchronized", "this", "throw", "throws",
        "transient", "try", "void", "volatile", "while",
    };
    return kw;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_part(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_separator_char(char c) {
    switch (c) {
        case '(': case ')': case '{': case '}': case '[': case ']':
        case ';': case ',': case '.': case '@':
            return true;
        default:
            return false;
    }
}

// Multi-char operators, longest first so greedy matching works.
const std::array<std::string_view, 26>& multi_operators() {
    static const std::array<std::string_view, 26> ops = {
        ">>>=", "<<=", ">>=", ">>>", "...", "==", "!=", "<=", ">=", "&&",
        "||",  "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=",
        "^=",  "<<", ">>", "->", "::", "?:",
    };
    return ops;
}

bool is_operator_char(char c) {
    return std::string_view("+-*/%=<>!&|^~?:").find(c) != std::string_view::npos;
}

}   // namespace

bool is_java_keyword(std::string_view word) {
    return keyword_set().count(word) > 0;
}

bool looks_like_identifier(std::string_view text) {
    if (text.empty() || !is_ident_start(text.front())) return false;
    if (is_java_keyword(text)) return false;
    return std::all_of(text.begin(), text.end(), is_ident_part);
}

std::vector<CodeToken> tokenize_code(std::string_view source) {
    std::vector<CodeToken> tokens;
    size_t i = 0;
    const size_t n = source.size();

    auto emit = [&tokens](std::string text, TokenKind kind) {
        tokens.push_back(CodeToken{std::move(text), kind, static_cast<int>(tokens.size())});
    };

    while (i < n) {
        char c = source[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        // comments
        if (c == '/' && i + 1 < n && source[i + 1] == '/') {
            while (i < n && source[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && source[i + 1] == '*') {
            size_t start = i;
            i += 2;
            while (i + 1 < n && !(source[i] == '*' && source[i + 1] == '/')) ++i;
            if (i + 1 >= n) throw LexError("unterminated block comment", start);
            i += 2;
            continue;
        }
        // string / char literals
        if (c == '"' || c == '\'') {
            size_t start = i;
            char quote = c;
            ++i;
            while (i < n && source[i] != quote) {
                if (source[i] == '\\') ++i;   // skip escaped char
                if (source[i] == '\n') throw LexError("unterminated literal", start);
                ++i;
            }
            if (i >= n) throw LexError("unterminated literal", start);
            ++i;
            emit(std::string(source.substr(start, i - start)), TokenKind::Literal);
            continue;
        }
        // numbers (permissive: hex, underscores, suffixes, exponents)
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = i;
            ++i;
            while (i < n) {
                char d = source[i];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '_') {
                    ++i;
                } else if (d == '.' && i + 1 < n &&
                           std::isdigit(static_cast<unsigned char>(source[i + 1]))) {
                    ++i;
                } else if ((d == '+' || d == '-') &&
                           (source[i - 1] == 'e' || source[i - 1] == 'E')) {
                    ++i;
                } else {
                    break;
                }
            }
            emit(std::string(source.substr(start, i - start)), TokenKind::Literal);
            continue;
        }
        // identifiers / keywords / word literals
        if (is_ident_start(c)) {
            size_t start = i;
            while (i < n && is_ident_part(source[i])) ++i;
            std::string word(source.substr(start, i - start));
            if (word == "true" || word == "false" || word == "null") {
                emit(std::move(word), TokenKind::Literal);
            } else if (is_java_keyword(word)) {
                emit(std::move(word), TokenKind::Keyword);
            } else {
                emit(std::move(word), TokenKind::Identifier);
            }
            continue;
        }
        if (is_separator_char(c)) {
            emit(std::string(1, c), TokenKind::Separator);
            ++i;
            continue;
        }
        if (is_operator_char(c)) {
            bool matched = false;
            for (std::string_view op : multi_operators()) {
                if (source.substr(i, op.size()) == op) {
                    emit(std::string(op), TokenKind::Operator);
                    i += op.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                emit(std::string(1, c), TokenKind::Operator);
                ++i;
            }
            continue;
        }
        throw LexError(std::string("illegal character '") + c + "'", i);
    }

    if (tokens.empty()) throw LexError("empty method source", 0);
    return tokens;
}

std::vector<std::string> subtokenize(std::string_view token) {
    std::vector<std::string> parts;
    std::string current;

    auto flush = [&]() {
        if (!current.empty()) {
            parts.push_back(current);
            current.clear();
        }
    };

    char prev = '\0';
    for (char c : token) {
        if (!std::isalnum(static_cast<unsigned char>(c))) {
            flush();
            prev = '\0';
            continue;
        }
        bool prev_alpha = std::isalpha(static_cast<unsigned char>(prev));
        bool prev_digit = std::isdigit(static_cast<unsigned char>(prev));
        bool cur_digit = std::isdigit(static_cast<unsigned char>(c));
        if (prev != '\0') {
            bool case_split = std::islower(static_cast<unsigned char>(prev)) &&
                              std::isupper(static_cast<unsigned char>(c));
            bool digit_split = (prev_alpha && cur_digit) || (prev_digit && !cur_digit);
            if (case_split || digit_split) flush();
        }
        current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        prev = c;
    }
    flush();

    if (parts.empty()) {
        // no alphanumeric content (an operator, punctuation, ...): keep it whole
        std::string whole(token);
        std::transform(whole.begin(), whole.end(), whole.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        parts.push_back(std::move(whole));
    }
    return parts;
}

CommentTokenSeq tokenize_comment(std::string_view text, CommentType type,
                                 std::optional<std::string> param_name) {
    if (type == CommentType::Param && !param_name)
        throw std::invalid_argument("param comment requires a parameter name");
    if (type != CommentType::Param && param_name)
        throw std::invalid_argument("param_name only valid for @param comments");

    CommentTokenSeq seq;
    seq.comment_type = type;
    seq.param_name = std::move(param_name);

    int token_index = 0;
    std::string word;
    auto flush_word = [&]() {
        if (word.empty()) return;
        for (const std::string& sub : subtokenize(word))
            seq.subtokens.push_back(Subtoken{sub, token_index});
        ++token_index;
        word.clear();
    };

    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(c);
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            flush_word();
        } else {
            flush_word();
            if (c == '@') continue;   // tag sigil, redundant with comment_type
            seq.subtokens.push_back(Subtoken{std::string(1, c), token_index});
            ++token_index;
        }
    }
    flush_word();

    if (seq.subtokens.empty()) throw EmptyComment("comment has no tokens");
    return seq;
}

std::vector<std::string> code_subtokens(const std::vector<CodeToken>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const CodeToken& tok : tokens) {
        if (tok.kind == TokenKind::Identifier) {
            for (std::string& s : subtokenize(tok.text)) out.push_back(std::move(s));
        } else if (tok.kind == TokenKind::Literal) {
            std::string lowered = tok.text;
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            out.push_back(std::move(lowered));
        } else {
            out.push_back(tok.text);
        }
    }
    return out;
}

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Identifier: return "identifier";
        case TokenKind::Keyword: return "keyword";
        case TokenKind::Operator: return "operator";
        case TokenKind::Separator: return "separator";
        case TokenKind::Literal: return "literal";
    }
    return "?";
}

const char* to_string(CommentType type) {
    switch (type) {
        case CommentType::Return: return "return";
        case CommentType::Param: return "param";
        case CommentType::Summary: return "summary";
    }
    return "?";
}

CommentType comment_type_from_string(std::string_view s) {
    if (s == "return") return CommentType::Return;
    if (s == "param") return CommentType::Param;
    if (s == "summary") return CommentType::Summary;
    throw std::invalid_argument("unknown comment type: " + std::string(s));
}

}   // namespace jitid::lex
