#pragma once

// Small DOM-style XML reader, just enough for the cascade file format:
// elements, attributes, character data, comments and the five standard
// entities.  No namespaces, no CDATA, no DOCTYPE.

#include <cctype>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gazeforge::xml {

struct Node {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<Node> children;
  std::string text;

  const std::string* attr(const std::string& name) const {
    for (const auto& [k, v] : attrs)
      if (k == name) return &v;
    return nullptr;
  }
  const Node* child(const std::string& name) const {
    for (const auto& c : children)
      if (c.tag == name) return &c;
    return nullptr;
  }
  std::vector<const Node*> all(const std::string& name) const {
    std::vector<const Node*> out;
    for (const auto& c : children)
      if (c.tag == name) out.push_back(&c);
    return out;
  }
  std::string trimmed() const {
    std::size_t a = text.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = text.find_last_not_of(" \t\r\n");
    return text.substr(a, b - a + 1);
  }
};

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  Node document() {
    skip_misc();
    if (!starts_with("<")) fail("expected root element");
    Node root = element();
    skip_misc();
    if (pos_ != s_.size()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i)
      if (s_[i] == '\n') ++line;
    throw std::runtime_error("xml: " + why + " (line " + std::to_string(line) + ")");
  }

  bool starts_with(const char* p) const {
    return s_.compare(pos_, std::char_traits<char>::length(p), p) == 0;
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<?")) {
        const auto end = s_.find("?>", pos_);
        if (end == std::string::npos) fail("unterminated processing instruction");
        pos_ = end + 2;
      } else if (starts_with("<!--")) {
        const auto end = s_.find("-->", pos_ + 4);
        if (end == std::string::npos) fail("unterminated comment");
        pos_ = end + 3;
      } else if (starts_with("<!")) {
        fail("unsupported markup declaration");
      } else {
        return;
      }
    }
  }

  static bool name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' ||
           c == ':';
  }

  std::string name() {
    if (pos_ >= s_.size() || !name_start(s_[pos_])) fail("expected name");
    const std::size_t start = pos_;
    while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  std::string entity() {
    const auto semi = s_.find(';', pos_);
    if (semi == std::string::npos || semi - pos_ > 10) fail("bad entity reference");
    const std::string e = s_.substr(pos_ + 1, semi - pos_ - 1);
    pos_ = semi + 1;
    if (e == "lt") return "<";
    if (e == "gt") return ">";
    if (e == "amp") return "&";
    if (e == "quot") return "\"";
    if (e == "apos") return "'";
    if (!e.empty() && e[0] == '#') {
      const long code = e[1] == 'x' || e[1] == 'X' ? std::stol(e.substr(2), nullptr, 16)
                                                   : std::stol(e.substr(1));
      if (code < 1 || code > 127) fail("non-ascii character reference");
      return std::string(1, char(code));
    }
    fail("unknown entity &" + e + ";");
  }

  std::string attr_value() {
    if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quote");
    const char q = s_[pos_++];
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != q) {
      if (s_[pos_] == '&') {
        out += entity();
      } else if (s_[pos_] == '<') {
        fail("raw '<' in attribute value");
      } else {
        out += s_[pos_++];
      }
    }
    if (pos_ >= s_.size()) fail("unterminated attribute value");
    ++pos_;
    return out;
  }

  Node element() {
    ++pos_;  // '<'
    Node node;
    node.tag = name();
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated tag");
      if (starts_with("/>")) {
        pos_ += 2;
        return node;
      }
      if (s_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string key = name();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '=' after attribute name");
      ++pos_;
      skip_ws();
      node.attrs.emplace_back(std::move(key), attr_value());
    }

    for (;;) {
      if (pos_ >= s_.size()) fail("unterminated element <" + node.tag + ">");
      if (starts_with("</")) {
        pos_ += 2;
        const std::string close = name();
        if (close != node.tag)
          fail("mismatched close tag </" + close + "> for <" + node.tag + ">");
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '>') fail("malformed close tag");
        ++pos_;
        return node;
      }
      if (starts_with("<!--")) {
        const auto end = s_.find("-->", pos_ + 4);
        if (end == std::string::npos) fail("unterminated comment");
        pos_ = end + 3;
      } else if (s_[pos_] == '<') {
        node.children.push_back(element());
      } else if (s_[pos_] == '&') {
        node.text += entity();
      } else {
        node.text += s_[pos_++];
      }
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

inline Node parse(const std::string& s) { return Parser(s).document(); }

}  // namespace gazeforge::xml
