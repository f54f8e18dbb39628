#include "srcv/io/captions.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "srcv/errors.hpp"

namespace srcv::io {
namespace {

constexpr const char* kHeader = "id,video_id,narration,verb_class,noun_classes";

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (was_quoted) {
      throw Error(ErrorKind::Parse, where + ": text after closing quote");
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw Error(ErrorKind::Parse, where + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

std::size_t parse_class(const std::string& text, const std::string& where, const char* field) {
  std::size_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::Parse, where + ": " + field + " '" + text +
                                      "' is not a non-negative integer");
  }
  return value;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<Caption> parse_captions(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, source + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw Error(ErrorKind::Parse, source + ":1: expected header '" + std::string(kHeader) + "'");
  }
  std::vector<Caption> captions;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    auto fields = split_csv_line(line, where);
    if (fields.size() != 5) {
      throw Error(ErrorKind::Parse, where + ": expected 5 fields, got " +
                                        std::to_string(fields.size()));
    }
    Caption c;
    c.id = std::move(fields[0]);
    c.video_id = std::move(fields[1]);
    c.text = std::move(fields[2]);
    if (c.id.empty()) throw Error(ErrorKind::Parse, where + ": empty id");
    if (c.text.empty()) throw Error(ErrorKind::Parse, where + ": empty narration");
    c.verb_class = parse_class(fields[3], where, "verb_class");
    std::istringstream nouns(fields[4]);
    std::string tok;
    while (nouns >> tok) c.noun_classes.push_back(parse_class(tok, where, "noun_classes"));
    std::sort(c.noun_classes.begin(), c.noun_classes.end());
    c.noun_classes.erase(std::unique(c.noun_classes.begin(), c.noun_classes.end()),
                         c.noun_classes.end());
    if (!seen.insert(c.id).second) {
      throw Error(ErrorKind::DuplicateId, where + ": duplicate caption id '" + c.id + "'");
    }
    captions.push_back(std::move(c));
  }
  return captions;
}

std::vector<Caption> load_captions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_captions(in, path.string());
}

void write_captions(std::ostream& out, std::span<const Caption> captions) {
  out << kHeader << '\n';
  for (const auto& c : captions) {
    out << quote(c.id) << ',' << quote(c.video_id) << ',' << quote(c.text) << ',' << c.verb_class
        << ',';
    for (std::size_t i = 0; i < c.noun_classes.size(); ++i) {
      out << (i ? " " : "") << c.noun_classes[i];
    }
    out << '\n';
  }
}

void save_captions(const std::filesystem::path& path, std::span<const Caption> captions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_captions(out, captions);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace srcv::io
