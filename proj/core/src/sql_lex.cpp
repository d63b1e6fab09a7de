#include "sql_lex.hpp"

#include <algorithm>
#include <cctype>

namespace relsearch::sqlx {

namespace {

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

std::vector<std::string> tokens(const std::string& sql) {
    std::vector<std::string> out;
    size_t i = 0;
    const size_t n = sql.size();
    while (i < n) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = std::min(n, i + 2);
        } else if (c == '\'') {
            ++i;
            while (i < n) {
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
            out.push_back("'");
        } else if (c == '"' || c == '`' || c == '[') {
            char close = c == '[' ? ']' : c;
            ++i;
            std::string word;
            while (i < n && sql[i] != close) word += sql[i++];
            if (i < n) ++i;
            out.push_back(lower(word));
        } else if (ident_start(c)) {
            std::string word;
            while (i < n && ident_char(sql[i])) word += sql[i++];
            out.push_back(lower(word));
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string num;
            while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.'))
                num += sql[i++];
            out.push_back(num);
        } else {
            out.push_back(std::string(1, c));
            ++i;
        }
    }
    return out;
}

std::string first_keyword(const std::string& sql) {
    for (const auto& t : tokens(sql)) {
        if (t == ";" || t == "(") continue;
        if (!t.empty() && ident_start(t[0])) return t;
        return "";
    }
    return "";
}

bool contains_word(const std::string& sql, const std::string& word) {
    const std::string w = lower(word);
    for (const auto& t : tokens(sql))
        if (t == w) return true;
    return false;
}

bool has_limit(const std::string& sql) { return contains_word(sql, "limit"); }

std::vector<std::string> outer_select_list(const std::string& sql) {
    const auto toks = tokens(sql);
    int depth = 0;
    size_t sel = toks.size();
    for (size_t i = 0; i < toks.size(); ++i) {
        if (toks[i] == "(") {
            ++depth;
        } else if (toks[i] == ")") {
            --depth;
        } else if (depth == 0 && toks[i] == "select") {
            sel = i;
            break;
        }
    }
    std::vector<std::string> list;
    if (sel == toks.size()) return list;
    depth = 0;
    for (size_t i = sel + 1; i < toks.size(); ++i) {
        if (toks[i] == "(") {
            ++depth;
        } else if (toks[i] == ")") {
            --depth;
        } else if (depth == 0 && toks[i] == "from") {
            break;
        }
        list.push_back(toks[i]);
    }
    return list;
}

}  // namespace relsearch::sqlx
