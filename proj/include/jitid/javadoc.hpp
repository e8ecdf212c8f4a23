#ifndef JITID_JAVADOC_HPP
#define JITID_JAVADOC_HPP

#include <optional>
#include <string>
#include <vector>

#include "jitid/lex.hpp"

namespace jitid::javadoc {

/** One analyzable unit of a doc comment: the summary sentence, the @return
 *  tag, or a single @param tag. The text keeps its tag marker. */
struct CommentUnit {
    lex::CommentType type;
    std::optional<std::string> param_name;   // present iff type == Param
    std::string text;
};

/** Splits raw javadoc (with or without the surrounding markers and leading
 *  asterisks) into comment units. The summary is the first sentence of the
 *  main description. */
std::vector<CommentUnit> split_comment_units(const std::string& javadoc);

/** Strips the javadoc frame and per-line asterisks, leaving plain content. */
std::string strip_doc_markers(const std::string& javadoc);

struct ExtractedMethod {
    std::string doc;      // raw javadoc block, markers included
    std::string key;      // method name + "/" + parameter count
    std::string source;   // full method declaration text
};

/** Scans a whole Java source file for javadoc blocks followed by method
 *  declarations that the built-in parser accepts. Fields, constructors and
 *  nested types behind a javadoc block are skipped. */
std::vector<ExtractedMethod> extract_documented_methods(const std::string& java_source);

}   // namespace jitid::javadoc

#endif
