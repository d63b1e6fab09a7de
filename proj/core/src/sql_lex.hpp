#pragma once

// Lexical SQL scanning used by the exploration gate, the anchoring check, and
// the invariance audit. Deliberately not a parser: string literals and
// comments are skipped, identifiers are lowercased, everything else becomes
// single-character tokens.

#include <string>
#include <vector>

namespace relsearch::sqlx {

/// Lowercased word tokens plus punctuation tokens; string literals collapse
/// to the single token "'" so their content never matches a word.
std::vector<std::string> tokens(const std::string& sql);

/// First word token, lowercased; empty when the statement is blank.
std::string first_keyword(const std::string& sql);

/// True when `word` appears as a standalone identifier/keyword token.
bool contains_word(const std::string& sql, const std::string& word);

/// True when a LIMIT keyword appears anywhere outside strings/comments.
bool has_limit(const std::string& sql);

/// Tokens of the outermost SELECT list (between the first depth-0 SELECT and
/// the matching depth-0 FROM). Empty when no depth-0 SELECT exists.
std::vector<std::string> outer_select_list(const std::string& sql);

}  // namespace relsearch::sqlx
