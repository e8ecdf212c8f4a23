#include <doctest.h>

#include <random>

#include "jitid/lex.hpp"

using namespace jitid::lex;

TEST_CASE("tokenize_code: return statement") {
    auto toks = tokenize_code("return nodeIds;");
    REQUIRE(toks.size() == 3);
    CHECK(toks[0].text == "return");
    CHECK(toks[0].kind == TokenKind::Keyword);
    CHECK(toks[1].text == "nodeIds");
    CHECK(toks[1].kind == TokenKind::Identifier);
    CHECK(toks[2].text == ";");
    CHECK(toks[2].kind == TokenKind::Separator);
    CHECK(toks[2].position == 2);
}

TEST_CASE("tokenize_code: declaration kinds") {
    auto toks = tokenize_code("int x = 0;");
    REQUIRE(toks.size() == 5);
    CHECK(toks[0].kind == TokenKind::Keyword);
    CHECK(toks[1].kind == TokenKind::Identifier);
    CHECK(toks[2].kind == TokenKind::Operator);
    CHECK(toks[3].kind == TokenKind::Literal);
    CHECK(toks[4].kind == TokenKind::Separator);
}

TEST_CASE("tokenize_code: empty source is an error") {
    CHECK_THROWS_AS(tokenize_code(""), LexError);
    CHECK_THROWS_AS(tokenize_code("   \n\t "), LexError);
}

TEST_CASE("tokenize_code: literals and comments") {
    auto toks = tokenize_code("String s = \"a b;c\"; // trailing\n/* block */ char c = 'x';");
    REQUIRE(toks.size() == 10);
    CHECK(toks[3].text == "\"a b;c\"");
    CHECK(toks[3].kind == TokenKind::Literal);
    CHECK(toks[8].text == "'x'");
    CHECK(toks[8].kind == TokenKind::Literal);

    CHECK_THROWS_AS(tokenize_code("String s = \"oops"), LexError);
    CHECK_THROWS_AS(tokenize_code("int x; /* no end"), LexError);
    CHECK_THROWS_AS(tokenize_code("int x = #3;"), LexError);
}

TEST_CASE("tokenize_code: multi-char operators stay glued") {
    auto toks = tokenize_code("a >>= b >>> c != d;");
    CHECK(toks[1].text == ">>=");
    CHECK(toks[3].text == ">>>");
    CHECK(toks[5].text == "!=");
}

TEST_CASE("tokenize_code is deterministic") {
    const char* src = "public Set<UUID> nodeIds() { return new HashSet<>(ids); }";
    CHECK(tokenize_code(src) == tokenize_code(src));
}

TEST_CASE("subtokenize: splitting rules") {
    CHECK(subtokenize("camelCase") == std::vector<std::string>{"camel", "case"});
    CHECK(subtokenize("snake_case") == std::vector<std::string>{"snake", "case"});
    CHECK(subtokenize("toString") == std::vector<std::string>{"to", "string"});
    CHECK(subtokenize("x") == std::vector<std::string>{"x"});
    CHECK(subtokenize("utf8Name") == std::vector<std::string>{"utf", "8", "name"});
    CHECK(subtokenize("IDs") == std::vector<std::string>{"ids"});
    CHECK(subtokenize("PropertyKey") == std::vector<std::string>{"property", "key"});
    // no alphanumeric content: returned whole
    CHECK(subtokenize("==") == std::vector<std::string>{"=="});
}

TEST_CASE("subtokenize is idempotent on its own outputs") {
    std::mt19937_64 rng(7);
    const std::string pool[] = {"getName", "HTMLParser", "foo_bar_baz", "utf8Name",
                                "a1B2c3", "X", "nodeIds", "__weird__"};
    for (const auto& ident : pool) {
        for (const auto& sub : subtokenize(ident)) {
            CHECK(subtokenize(sub) == std::vector<std::string>{sub});
        }
    }
}

TEST_CASE("subtokenize round-trips alphanumeric content") {
    const std::string pool[] = {"getName", "HTMLParser", "foo_bar_baz", "utf8Name",
                                "parseHTTPResponse2", "$synthetic$name", "a"};
    for (const auto& ident : pool) {
        std::string joined;
        for (const auto& sub : subtokenize(ident)) joined += sub;
        std::string stripped;
        for (char c : ident)
            if (std::isalnum(static_cast<unsigned char>(c)))
                stripped += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        CHECK(joined == stripped);
    }
}

TEST_CASE("tokenize_comment: @param tag") {
    auto seq = tokenize_comment("@param key the key to check", CommentType::Param, "key");
    CHECK(seq.texts() == std::vector<std::string>{"param", "key", "the", "key", "to", "check"});
    CHECK(seq.comment_type == CommentType::Param);
    REQUIRE(seq.param_name.has_value());
    CHECK(*seq.param_name == "key");
}

TEST_CASE("tokenize_comment: summary with punctuation") {
    auto seq = tokenize_comment("Gets node IDs as array.", CommentType::Summary);
    CHECK(seq.texts() == std::vector<std::string>{"gets", "node", "ids", "as", "array", "."});
}

TEST_CASE("tokenize_comment: blank comment is an error") {
    CHECK_THROWS_AS(tokenize_comment("   ", CommentType::Summary), EmptyComment);
    // an @-sigil alone does not survive either
    CHECK_THROWS_AS(tokenize_comment("@", CommentType::Summary), EmptyComment);
}

TEST_CASE("tokenize_comment: param_name presence is enforced") {
    CHECK_THROWS_AS(tokenize_comment("x", CommentType::Param), std::invalid_argument);
    CHECK_THROWS_AS(tokenize_comment("x", CommentType::Return, "p"), std::invalid_argument);
}

TEST_CASE("tokenize_comment: subtokens point back at their word") {
    auto seq = tokenize_comment("returns nodeIds.", CommentType::Return);
    // words: returns(0) nodeIds(1) .(2)
    REQUIRE(seq.subtokens.size() == 4);
    CHECK(seq.subtokens[0].parent_index == 0);
    CHECK(seq.subtokens[1].text == "node");
    CHECK(seq.subtokens[1].parent_index == 1);
    CHECK(seq.subtokens[2].text == "ids");
    CHECK(seq.subtokens[2].parent_index == 1);
    CHECK(seq.subtokens[3].text == ".");
    CHECK(seq.subtokens[3].parent_index == 2);
}

TEST_CASE("code_subtokens splits identifiers and keeps literals atomic") {
    auto toks = tokenize_code("return nodeIds + \"A B\";");
    auto subs = code_subtokens(toks);
    CHECK(subs == std::vector<std::string>{"return", "node", "ids", "+", "\"a b\"", ";"});
}
