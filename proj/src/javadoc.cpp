#include "jitid/javadoc.hpp"

#include <cctype>
#include <sstream>

#include "jitid/astdiff.hpp"

namespace jitid::javadoc {

std::string strip_doc_markers(const std::string& javadoc) {
    std::string body = javadoc;
    if (body.starts_with("/**")) body = body.substr(3);
    else if (body.starts_with("/*")) body = body.substr(2);
    if (body.ends_with("*/")) body = body.substr(0, body.size() - 2);

    std::string out;
    std::istringstream lines(body);
    std::string line;
    while (std::getline(lines, line)) {
        size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        while (i < line.size() && line[i] == '*') ++i;
        if (i < line.size() && line[i] == ' ') ++i;
        if (!out.empty()) out.push_back('\n');
        out += line.substr(i);
    }
    return out;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string collapse_ws(const std::string& s) {
    std::string out;
    bool in_ws = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

/** First sentence: up to the first '.' that ends a word (followed by
 *  whitespace or the end), otherwise the whole description. */
std::string first_sentence(const std::string& description) {
    for (size_t i = 0; i < description.size(); ++i) {
        if (description[i] != '.') continue;
        if (i + 1 == description.size() ||
            std::isspace(static_cast<unsigned char>(description[i + 1])))
            return description.substr(0, i + 1);
    }
    return description;
}

}   // namespace

std::vector<CommentUnit> split_comment_units(const std::string& javadoc) {
    std::string content = strip_doc_markers(javadoc);

    // cut into the main description and @tag sections
    std::vector<std::string> sections;
    std::string current;
    std::istringstream lines(content);
    std::string line;
    while (std::getline(lines, line)) {
        std::string t = trim(line);
        if (t.starts_with("@")) {
            sections.push_back(current);
            current = t;
        } else if (!t.empty()) {
            if (!current.empty()) current.push_back(' ');
            current += t;
        }
    }
    sections.push_back(current);

    std::vector<CommentUnit> units;
    bool have_return = false;
    if (!sections.empty()) {
        std::string summary = first_sentence(collapse_ws(trim(sections[0])));
        if (!summary.empty())
            units.push_back({lex::CommentType::Summary, std::nullopt, summary});
    }
    for (size_t i = 1; i < sections.size(); ++i) {
        std::string sec = collapse_ws(trim(sections[i]));
        if (sec.starts_with("@return")) {
            if (have_return) continue;
            have_return = true;
            units.push_back({lex::CommentType::Return, std::nullopt, sec});
        } else if (sec.starts_with("@param")) {
            std::istringstream words(sec.substr(6));
            std::string name;
            words >> name;
            if (name.empty()) continue;
            units.push_back({lex::CommentType::Param, name, sec});
        }
        // @throws, @see, @since, ... are out of scope
    }
    return units;
}

std::vector<ExtractedMethod> extract_documented_methods(const std::string& java_source) {
    std::vector<ExtractedMethod> out;
    const std::string& src = java_source;
    const size_t n = src.size();
    size_t i = 0;

    auto skip_string = [&](size_t pos, char quote) {
        ++pos;
        while (pos < n && src[pos] != quote) {
            if (src[pos] == '\\') ++pos;
            ++pos;
        }
        return pos < n ? pos + 1 : n;
    };

    while (i < n) {
        char c = src[i];
        if (c == '"' || c == '\'') {
            i = skip_string(i, c);
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (!(c == '/' && i + 2 < n && src[i + 1] == '*' && src[i + 2] == '*')) {
            ++i;
            continue;
        }

        // javadoc block
        size_t doc_start = i;
        size_t doc_end = src.find("*/", i + 3);
        if (doc_end == std::string::npos) break;
        doc_end += 2;
        i = doc_end;

        // skip whitespace and annotations before the declaration
        size_t d = doc_end;
        while (d < n) {
            if (std::isspace(static_cast<unsigned char>(src[d]))) { ++d; continue; }
            if (src[d] == '@') {
                ++d;
                while (d < n && (std::isalnum(static_cast<unsigned char>(src[d])) ||
                                 src[d] == '_' || src[d] == '.'))
                    ++d;
                while (d < n && std::isspace(static_cast<unsigned char>(src[d]))) ++d;
                if (d < n && src[d] == '(') {
                    int depth = 0;
                    while (d < n) {
                        if (src[d] == '"' || src[d] == '\'') { d = skip_string(d, src[d]); continue; }
                        if (src[d] == '(') ++depth;
                        if (src[d] == ')' && --depth == 0) { ++d; break; }
                        ++d;
                    }
                }
                continue;
            }
            break;
        }
        if (d >= n) break;

        // find the end of the declaration: ';' before any '{', or the
        // matching close of the first '{'
        size_t decl_start = d;
        size_t decl_end = std::string::npos;
        int brace = 0;
        for (size_t p = d; p < n; ++p) {
            char ch = src[p];
            if (ch == '"' || ch == '\'') { p = skip_string(p, ch) - 1; continue; }
            if (ch == '/' && p + 1 < n && src[p + 1] == '/') {
                while (p < n && src[p] != '\n') ++p;
                continue;
            }
            if (ch == '/' && p + 1 < n && src[p + 1] == '*') {
                size_t close = src.find("*/", p + 2);
                if (close == std::string::npos) break;
                p = close + 1;
                continue;
            }
            if (ch == ';' && brace == 0) { decl_end = p + 1; break; }
            if (ch == '{') ++brace;
            if (ch == '}') {
                if (--brace == 0) { decl_end = p + 1; break; }
                if (brace < 0) break;
            }
        }
        if (decl_end == std::string::npos) continue;

        std::string slice = src.substr(decl_start, decl_end - decl_start);
        try {
            astdiff::AstTree tree = astdiff::parse_method(slice);
            astdiff::MethodShape shape = astdiff::method_shape(tree);
            if (shape.name.empty()) continue;
            ExtractedMethod m;
            m.doc = src.substr(doc_start, doc_end - doc_start);
            m.key = shape.name + "/" + std::to_string(shape.parameters.size());
            m.source = std::move(slice);
            out.push_back(std::move(m));
            i = decl_end;
        } catch (const astdiff::ParseError&) {
            // field, constructor, nested type, or unsupported syntax
        }
    }
    return out;
}

}   // namespace jitid::javadoc
