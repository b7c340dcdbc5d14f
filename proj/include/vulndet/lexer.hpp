#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "vulndet/errors.hpp"

namespace vulndet {

enum class TokenKind { Identifier, Keyword, Number, StringLiteral, Punctuation };

struct Token {
    std::string text;
    TokenKind kind = TokenKind::Punctuation;
    int line = 1; // 1-based
    int col = 1;  // 1-based

    bool is(std::string_view t) const { return text == t; }
};

inline const std::unordered_set<std::string>& c_keywords() {
    static const std::unordered_set<std::string> kw = {
        "auto", "break", "case", "char", "const", "continue", "default",
        "do", "double", "else", "enum", "extern", "float", "for", "goto",
        "if", "inline", "int", "long", "register", "restrict", "return",
        "short", "signed", "sizeof", "static", "struct", "switch",
        "typedef", "union", "unsigned", "void", "volatile", "while"};
    return kw;
}

inline bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Two-character operators kept as single tokens. Everything else that is
// not an identifier/number/literal comes out as one character per token.
inline bool is_multichar_op(char a, char b) {
    static const std::array<const char*, 11> ops = {
        "==", "!=", "<=", ">=", "->", "&&", "||", "++", "--", "+=", "-="};
    for (const char* op : ops)
        if (op[0] == a && op[1] == b) return true;
    return false;
}

// Lex C source into a flat token stream. Comments are stripped and never
// reappear downstream. Throws UnterminatedLiteral for an unclosed string
// or character literal.
inline std::vector<Token> tokenize(const std::string& source) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1, col = 1;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (source[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };

    while (i < source.size()) {
        char c = source[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        // comments
        if (c == '/' && i + 1 < source.size() && source[i + 1] == '/') {
            while (i < source.size() && source[i] != '\n') advance(1);
            continue;
        }
        if (c == '/' && i + 1 < source.size() && source[i + 1] == '*') {
            advance(2);
            while (i + 1 < source.size() && !(source[i] == '*' && source[i + 1] == '/'))
                advance(1);
            if (i + 1 >= source.size()) {
                advance(source.size() - i);
            } else {
                advance(2);
            }
            continue;
        }

        Token tok;
        tok.line = line;
        tok.col = col;

        if (c == '"' || c == '\'') {
            char quote = c;
            std::string text(1, quote);
            std::size_t j = i + 1;
            bool closed = false;
            while (j < source.size()) {
                char d = source[j];
                if (d == '\n') break;
                text.push_back(d);
                ++j;
                if (d == '\\' && j < source.size() && source[j] != '\n') {
                    text.push_back(source[j]);
                    ++j;
                    continue;
                }
                if (d == quote) {
                    closed = true;
                    break;
                }
            }
            if (!closed)
                throw UnterminatedLiteral("unterminated literal at line " +
                                          std::to_string(line) + ", col " +
                                          std::to_string(col));
            tok.text = text;
            tok.kind = TokenKind::StringLiteral;
            advance(text.size());
            out.push_back(std::move(tok));
            continue;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < source.size() &&
             std::isdigit(static_cast<unsigned char>(source[i + 1])))) {
            std::size_t j = i;
            std::string text;
            while (j < source.size()) {
                char d = source[j];
                bool take = std::isalnum(static_cast<unsigned char>(d)) || d == '.';
                // exponent sign
                if ((d == '+' || d == '-') && j > i) {
                    char prev = source[j - 1];
                    take = (prev == 'e' || prev == 'E' || prev == 'p' || prev == 'P');
                }
                if (!take) break;
                text.push_back(d);
                ++j;
            }
            tok.text = text;
            tok.kind = TokenKind::Number;
            advance(text.size());
            out.push_back(std::move(tok));
            continue;
        }

        if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < source.size() && is_ident_char(source[j])) ++j;
            tok.text = source.substr(i, j - i);
            tok.kind = c_keywords().count(tok.text) ? TokenKind::Keyword
                                                    : TokenKind::Identifier;
            advance(tok.text.size());
            out.push_back(std::move(tok));
            continue;
        }

        // punctuation
        if (i + 1 < source.size() && is_multichar_op(c, source[i + 1])) {
            tok.text = source.substr(i, 2);
        } else {
            tok.text = std::string(1, c);
        }
        tok.kind = TokenKind::Punctuation;
        advance(tok.text.size());
        out.push_back(std::move(tok));
    }
    return out;
}

inline std::string join_token_texts(const std::vector<Token>& toks,
                                    const char* sep = " ") {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) s += sep;
        s += toks[i].text;
    }
    return s;
}

} // namespace vulndet
