#include "toml.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace mpflow::cli {

namespace {

using json = nlohmann::json;

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        const std::string key = bare_key();
        skip_ws();
        expect('=');
        skip_ws();
        if (table->contains(key)) fail("duplicate key '" + key + "'");
        (*table)[key] = value();
      }
      end_of_line();
    }
    return root;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("", "line " + std::to_string(line_) + ": " + msg);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }

  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
      } else {
        break;
      }
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_all() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (!eof() && peek() != '\n') fail("unexpected trailing characters");
  }

  static bool key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

  std::string bare_key() {
    std::string k;
    while (!eof() && key_char(peek())) k.push_back(get());
    if (k.empty()) fail("expected a key");
    return k;
  }

  json* header(json& root) {
    expect('[');
    const bool array = peek() == '[';
    if (array) get();
    skip_ws();
    std::vector<std::string> parts{bare_key()};
    while (skip_ws(), peek() == '.') {
      get();
      skip_ws();
      parts.push_back(bare_key());
    }
    expect(']');
    if (array) expect(']');

    json* t = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      json& next = (*t)[parts[i]];
      if (next.is_null()) next = json::object();
      if (next.is_array() && !next.empty() && next.back().is_object()) {
        t = &next.back();
      } else if (next.is_object()) {
        t = &next;
      } else {
        fail("'" + parts[i] + "' is not a table");
      }
    }
    json& leaf = (*t)[parts.back()];
    if (array) {
      if (leaf.is_null()) leaf = json::array();
      if (!leaf.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      leaf.push_back(json::object());
      return &leaf.back();
    }
    if (!leaf.is_null()) fail("table '" + parts.back() + "' defined twice");
    leaf = json::object();
    return &leaf;
  }

  json value() {
    const char c = peek();
    if (c == '"') return string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (keyword("true")) return true;
    if (keyword("false")) return false;
    return number();
  }

  bool keyword(const std::string& w) {
    if (s_.compare(pos_, w.size(), w) != 0) return false;
    if (pos_ + w.size() < s_.size() && key_char(s_[pos_ + w.size()])) return false;
    pos_ += w.size();
    return true;
  }

  json string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (eof()) fail("unterminated string");
      switch (get()) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        default: fail("unsupported escape sequence");
      }
    }
    return out;
  }

  json number() {
    const std::size_t start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      get();
    std::string tok = s_.substr(start, pos_ - start);
    std::erase(tok, '_');
    if (tok.empty()) fail("expected a value");
    const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
    const char* e = tok.data() + tok.size();
    if (tok.find_first_of(".eE") == std::string::npos) {
      std::int64_t i = 0;
      auto r = std::from_chars(b, e, i);
      if (r.ec == std::errc() && r.ptr == e) return i;
    }
    double d = 0.0;
    auto r = std::from_chars(b, e, d);
    if (r.ec != std::errc() || r.ptr != e) fail("invalid value '" + tok + "'");
    return d;
  }

  json array() {
    expect('[');
    json out = json::array();
    skip_all();
    while (peek() != ']') {
      out.push_back(value());
      skip_all();
      if (peek() == ',') {
        get();
        skip_all();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    get();
    return out;
  }

  json inline_table() {
    expect('{');
    json out = json::object();
    skip_ws();
    while (peek() != '}') {
      const std::string key = bare_key();
      skip_ws();
      expect('=');
      skip_ws();
      if (out.contains(key)) fail("duplicate key '" + key + "'");
      out[key] = value();
      skip_ws();
      if (peek() == ',') {
        get();
        skip_ws();
      } else if (peek() != '}') {
        fail("expected ',' or '}' in inline table");
      }
    }
    get();
    return out;
  }
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return Parser(text).parse(); }

nlohmann::json parse_toml_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("", "cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_toml(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.key(), file.string() + ": " + e.what());
  }
}

}  // namespace mpflow::cli
