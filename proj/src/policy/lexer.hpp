#pragma once

#include "ovita/policy/ast.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace ovita::policy::detail {

enum class Tok {
    Number,
    String,
    Ident,
    Keyword,  // let for in if else true false and or not
    Punct,
    End,
};

struct Token {
    Tok kind;
    std::string text;  // identifier, keyword, punctuation, or decoded string body
    double number = 0.0;
    SourcePos pos;
};

/// Throws SyntaxError on malformed input and DisallowedConstruct on banned words.
std::vector<Token> lex(std::string_view src);

bool is_banned_word(std::string_view word);

}  // namespace ovita::policy::detail
