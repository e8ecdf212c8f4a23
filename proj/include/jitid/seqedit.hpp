#ifndef JITID_SEQEDIT_HPP
#define JITID_SEQEDIT_HPP

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitid/lex.hpp"

namespace jitid::seqedit {

enum class Action { Insert, Delete, Keep, ReplaceOld, ReplaceNew };

struct EditSpan {
    Action action;
    std::vector<std::string> tokens;   // contiguous span in its source stream

    bool operator==(const EditSpan&) const = default;
};

struct EditScript {
    std::vector<EditSpan> actions;
    size_t old_len = 0;
    size_t new_len = 0;
};

class ScriptMismatch : public std::runtime_error {
public:
    explicit ScriptMismatch(const std::string& what) : std::runtime_error(what) {}
};

/** Minimal-distance edit script between two subtoken streams.
 *
 *  LCS alignment under unit-cost insert/delete; the backtrace prefers Keep,
 *  then Delete, then Insert, so the result is deterministic. A Delete run
 *  immediately followed by an Insert run is re-expressed as a
 *  ReplaceOld/ReplaceNew pair. Maximal runs of one action are merged into a
 *  single span.
 */
EditScript compute_edit_script(std::span<const std::string> old_tokens,
                               std::span<const std::string> new_tokens);

/** Replays a script against the stream it was computed from; throws
 *  ScriptMismatch if Keep/Delete/ReplaceOld spans do not align. */
std::vector<std::string> apply_edit_script(std::span<const std::string> old_tokens,
                                           const EditScript& script);

/** One flat stream: each span rendered as its action keyword followed by the
 *  span's subtokens. The keywords are reserved vocabulary entries. */
std::vector<std::string> linearize(const EditScript& script);

/** Edit script between two method versions, aligned at the token level and
 *  rendered at the subtoken level.
 *
 *  A one-token removal such as String -> PropertyKey therefore pairs with the
 *  full subtoken expansion of its replacement ([property, key]), instead of
 *  the subtoken-level LCS splitting the shared "key" out of the span. The
 *  result round-trips against code_subtokens(old_tokens).
 */
EditScript method_edit_script(const std::vector<lex::CodeToken>& old_tokens,
                              const std::vector<lex::CodeToken>& new_tokens);

const std::string& action_keyword(Action a);
const char* to_string(Action a);

}   // namespace jitid::seqedit

#endif
