#include "lexer.hpp"

#include "ovita/policy/parser.hpp"

#include <array>
#include <cmath>
#include <charconv>

namespace ovita::policy::detail {

namespace {

constexpr std::array<std::string_view, 10> kKeywords = {"let", "for", "in", "if", "else",
                                                        "true", "false", "and", "or", "not"};

// Words from general-purpose languages that the sandbox refuses outright.
constexpr std::array<std::string_view, 32> kBanned = {
    "import", "from",   "def",     "class", "lambda",   "while",  "with",   "try",    "except",
    "finally", "raise", "global",  "nonlocal", "return", "yield", "async",  "await",  "del",
    "assert", "pass",   "exec",    "eval",  "open",     "compile", "globals", "locals", "getattr",
    "setattr", "input", "print",   "system", "subprocess"};

bool is_ident_start(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    explicit Lexer(std::string_view s) : s_(s) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            const SourcePos at = pos_;
            if (i_ >= s_.size()) {
                out.push_back({Tok::End, "", 0.0, at});
                return out;
            }
            const auto c = static_cast<unsigned char>(s_[i_]);
            if (is_ident_start(c)) {
                out.push_back(word(at));
            } else if (is_digit(c) || (c == '.' && i_ + 1 < s_.size() && is_digit(s_[i_ + 1]))) {
                out.push_back(number(at));
            } else if (c == '"' || c == '\'') {
                out.push_back(string(at));
            } else {
                out.push_back(punct(at));
            }
        }
    }

private:
    void advance() {
        if (s_[i_] == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        ++i_;
    }

    void skip_space() {
        while (i_ < s_.size()) {
            const char c = s_[i_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#' || (c == '/' && i_ + 1 < s_.size() && s_[i_ + 1] == '/')) {
                while (i_ < s_.size() && s_[i_] != '\n') advance();
            } else {
                return;
            }
        }
    }

    Token word(SourcePos at) {
        const std::size_t b = i_;
        while (i_ < s_.size() && (is_ident_start(s_[i_]) || is_digit(s_[i_]))) advance();
        std::string w(s_.substr(b, i_ - b));
        if (is_banned_word(w)) throw DisallowedConstruct(w, at.line, at.column);
        for (auto k : kKeywords) {
            if (w == k) return {Tok::Keyword, w, 0.0, at};
        }
        return {Tok::Ident, w, 0.0, at};
    }

    Token number(SourcePos at) {
        const std::size_t b = i_;
        while (i_ < s_.size() && is_digit(s_[i_])) advance();
        if (i_ < s_.size() && s_[i_] == '.') {
            advance();
            while (i_ < s_.size() && is_digit(s_[i_])) advance();
        }
        if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
            advance();
            if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) advance();
            if (i_ >= s_.size() || !is_digit(s_[i_])) throw SyntaxError(pos_.line, pos_.column, "exponent digits");
            while (i_ < s_.size() && is_digit(s_[i_])) advance();
        }
        if (i_ < s_.size() && is_ident_start(s_[i_])) throw SyntaxError(pos_.line, pos_.column, "end of number");
        const std::string_view text = s_.substr(b, i_ - b);
        double v = 0.0;
        const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
        if (r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
            throw SyntaxError(at.line, at.column, "finite number literal");
        }
        return {Tok::Number, std::string(text), v, at};
    }

    Token string(SourcePos at) {
        const char quote = s_[i_];
        advance();
        std::string body;
        for (;;) {
            if (i_ >= s_.size() || s_[i_] == '\n') throw SyntaxError(at.line, at.column, "closing quote");
            const char c = s_[i_];
            if (c == quote) {
                advance();
                break;
            }
            if (c == '\\') {
                advance();
                if (i_ >= s_.size()) throw SyntaxError(pos_.line, pos_.column, "escape character");
                switch (s_[i_]) {
                    case 'n': body += '\n'; break;
                    case 't': body += '\t'; break;
                    case '\\': body += '\\'; break;
                    case '"': body += '"'; break;
                    case '\'': body += '\''; break;
                    default: throw SyntaxError(pos_.line, pos_.column, "one of \\n \\t \\\\ \\\" \\'");
                }
                advance();
                continue;
            }
            if (static_cast<unsigned char>(c) < 0x20) throw SyntaxError(pos_.line, pos_.column, "printable character");
            body += c;
            advance();
        }
        return {Tok::String, body, 0.0, at};
    }

    Token punct(SourcePos at) {
        static constexpr std::array<std::string_view, 6> two = {"==", "!=", "<=", ">=", "&&", "||"};
        if (i_ + 1 < s_.size()) {
            const std::string_view p = s_.substr(i_, 2);
            for (auto t : two) {
                if (p == t) {
                    advance();
                    advance();
                    return {Tok::Punct, std::string(p), 0.0, at};
                }
            }
        }
        const char c = s_[i_];
        static constexpr std::string_view one = "(){}[],;=<>+-*/%!.";
        if (one.find(c) == std::string_view::npos) throw SyntaxError(at.line, at.column, "a token");
        advance();
        return {Tok::Punct, std::string(1, c), 0.0, at};
    }

    std::string_view s_;
    std::size_t i_ = 0;
    SourcePos pos_;
};

}  // namespace

bool is_banned_word(std::string_view word) {
    if (word.size() >= 2 && word[0] == '_' && word[1] == '_') return true;
    for (auto b : kBanned) {
        if (word == b) return true;
    }
    return false;
}

std::vector<Token> lex(std::string_view src) { return Lexer(src).run(); }

}  // namespace ovita::policy::detail
