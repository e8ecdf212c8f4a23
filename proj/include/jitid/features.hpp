#ifndef JITID_FEATURES_HPP
#define JITID_FEATURES_HPP

#include <string>
#include <vector>

#include "jitid/astdiff.hpp"
#include "jitid/lex.hpp"
#include "jitid/seqedit.hpp"

namespace jitid::features {

constexpr size_t kCommentFeatureWidth = 12;
constexpr size_t kSeqFeatureWidth = 13;
constexpr size_t kNodeFeatureWidth = 14;

/** Per comment subtoken: in-old-code, in-new-code, in-deleted-span,
 *  in-inserted-span, coarse POS one-hot {NOUN,VERB,ADJ,DET,OTHER},
 *  is-stopword, matches-return-type-subtoken, matches-parameter-name. */
std::vector<std::vector<double>> comment_features(
    const lex::CommentTokenSeq& comment, const std::vector<std::string>& old_subtokens,
    const std::vector<std::string>& new_subtokens, const seqedit::EditScript& script,
    const astdiff::MethodShape& new_shape);

/** Per position of a linearized edit script (or plain token stream rendered
 *  as an all-Keep script): action one-hot {KEEP,INSERT,DELETE,REPLACE_OLD,
 *  REPLACE_NEW}, in-comment, token kind one-hot, in-return-statement,
 *  in-signature. Action keywords carry only their action bit. */
std::vector<std::vector<double>> sequence_features(
    const seqedit::EditScript& script, const std::vector<lex::CodeToken>& old_tokens,
    const std::vector<lex::CodeToken>& new_tokens,
    const lex::CommentTokenSeq& comment);

/** Same layout for a plain (no-edit) subtoken stream: every position is
 *  treated as Keep. Rows align with code_subtokens(tokens). */
std::vector<std::vector<double>> plain_sequence_features(
    const std::vector<lex::CodeToken>& tokens, const lex::CommentTokenSeq& comment);

/** Per graph node: action one-hot {KEEP,INSERT,DELETE,REPLACE_OLD,
 *  REPLACE_NEW,MOVE}, in-comment, leaf token kind one-hot, inside a
 *  ReturnStatement, inside the signature (not under any Block). */
std::vector<std::vector<double>> node_features(const astdiff::DiffAstGraph& graph,
                                               const lex::CommentTokenSeq& comment);

/** Rule-lexicon part-of-speech tag: closed-class lists plus suffix rules. */
enum class PosTag { Noun, Verb, Adj, Det, Other };
PosTag pos_tag(const std::string& word);
bool is_stopword(const std::string& word);

}   // namespace jitid::features

#endif
