#include "classnet/csv.hpp"

#include <ostream>

#include "classnet/error.hpp"

namespace classnet::csv {

std::vector<Record> parse(std::string_view text, std::vector<std::string>* comments) {
  std::vector<Record> out;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  while (i < n) {
    // Skip blank and comment lines.
    if (text[i] == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n') {
      ++line;
      i += 2;
      continue;
    }
    if (text[i] == '#') {
      std::size_t end = text.find('\n', i);
      if (end == std::string_view::npos) end = n;
      std::string c(text.substr(i, end - i));
      if (!c.empty() && c.back() == '\r') c.pop_back();
      if (comments) comments->push_back(std::move(c));
      i = end;
      continue;
    }

    Record rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    while (i < n) {
      char ch = text[i];
      if (in_quotes) {
        if (ch == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (ch == '\n') ++line;
          field.push_back(ch);
          ++i;
        }
        continue;
      }
      if (ch == '"') {
        if (!field.empty() || was_quoted) {
          throw ParseError("line " + std::to_string(line) + ": unexpected quote inside field");
        }
        in_quotes = true;
        was_quoted = true;
        ++i;
      } else if (ch == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
        ++i;
      } else if (ch == '\r' && i + 1 < n && text[i + 1] == '\n') {
        i += 2;
        ++line;
        break;
      } else if (ch == '\n') {
        ++i;
        ++line;
        break;
      } else {
        if (was_quoted) {
          throw ParseError("line " + std::to_string(line) + ": text after closing quote");
        }
        field.push_back(ch);
        ++i;
      }
    }
    if (in_quotes) throw ParseError("line " + std::to_string(rec.line) + ": unterminated quoted field");
    rec.fields.push_back(std::move(field));
    out.push_back(std::move(rec));
  }
  return out;
}

std::string escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos ||
               (!field.empty() && (field.front() == ' ' || field.front() == '#'));
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace classnet::csv
