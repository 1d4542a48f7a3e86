#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace classnet::csv {

// One parsed record plus the 1-based physical line it started on, so that
// loaders can point at the offending line when a field fails validation.
struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines. Blank lines and lines starting with '#' outside quotes are
// skipped; the caller sees comment text through `comments` if requested.
std::vector<Record> parse(std::string_view text,
                          std::vector<std::string>* comments = nullptr);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace classnet::csv
