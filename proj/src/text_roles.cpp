#include "srcv/text_roles.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "srcv/errors.hpp"
#include "srcv/random.hpp"

namespace srcv {
namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    if (c < 0x80) {
      extra = 0;
    } else if ((c >> 5) == 0x6) {
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      extra = 3;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += extra + 1;
  }
  return true;
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

const char* to_string(Role role) noexcept {
  switch (role) {
    case Role::noun: return "NOUN";
    case Role::verb: return "VERB";
    case Role::other: return "OTHER";
  }
  return "OTHER";
}

void RoleLexicon::add(std::string_view token, Role role) { entries_[lowercase(token)] = role; }

Role RoleLexicon::lookup(std::string_view token) const {
  auto it = entries_.find(lowercase(token));
  return it == entries_.end() ? Role::other : it->second;
}

RoleLexicon RoleLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open lexicon " + path.string());
  RoleLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected token<TAB>TAG");
    }
    const std::string tag = line.substr(tab + 1);
    Role role;
    if (tag == "NOUN") {
      role = Role::noun;
    } else if (tag == "VERB") {
      role = Role::verb;
    } else {
      throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) +
                                        ": unknown tag '" + tag + "'");
    }
    lexicon.add(line.substr(0, tab), role);
  }
  return lexicon;
}

void RoleLexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write lexicon " + path.string());
  for (const auto& [token, role] : entries_) {
    if (role == Role::other) continue;
    out << token << '\t' << to_string(role) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> hash_embed(std::string_view token, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::Config, "embedding dim must be positive");
  Rng rng(fnv1a64(token) ^ seed);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform01() - 0.5;
  return v;
}

EmbeddingTable EmbeddingTable::hashed(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::Config, "embedding dim must be positive");
  return EmbeddingTable(dim, seed);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::uint64_t fallback_seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open embedding table " + path.string());
  EmbeddingTable table(0, fallback_seed);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorKind::Parse, where + ": expected token<TAB>values");
    }
    std::istringstream fields(line.substr(tab + 1));
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, where + ": bad number '" + field + "'");
      }
    }
    if (values.empty()) throw Error(ErrorKind::Parse, where + ": no values");
    if (table.dim_ == 0) table.dim_ = values.size();
    if (values.size() != table.dim_) {
      throw Error(ErrorKind::Parse, where + ": expected " + std::to_string(table.dim_) + " values");
    }
    table.vectors_[lowercase(line.substr(0, tab))] = std::move(values);
  }
  if (table.dim_ == 0) throw Error(ErrorKind::Parse, path.string() + ": empty embedding table");
  return table;
}

std::vector<double> EmbeddingTable::lookup(std::string_view token) const {
  if (auto it = vectors_.find(token); it != vectors_.end()) return it->second;
  return hash_embed(token, dim_, seed_);
}

void EmbeddingTable::save(const std::filesystem::path& path,
                          const std::vector<std::string>& tokens) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write embedding table " + path.string());
  out << std::setprecision(17);
  for (const auto& token : tokens) {
    out << token << '\t';
    const auto v = lookup(token);
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<std::string> tokenize(std::string_view text) {
  if (!valid_utf8(text)) throw Error(ErrorKind::Parse, "caption is not valid UTF-8");
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(ch >= 'A' && ch <= 'Z' ? static_cast<char>(ch - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  if (tokens.empty()) {
    throw Error(ErrorKind::TokenizationEmpty, "no tokens in '" + std::string(text) + "'");
  }
  return tokens;
}

std::vector<TaggedToken> tag_roles(const std::vector<std::string>& tokens,
                                   const RoleLexicon& lexicon) {
  std::vector<TaggedToken> tagged;
  tagged.reserve(tokens.size());
  for (const auto& t : tokens) tagged.emplace_back(t, lexicon.lookup(t));
  return tagged;
}

RoleVectors role_vectors(const std::vector<TaggedToken>& tagged, const EmbeddingTable& table) {
  auto pooled = [&](Role role, bool& missing) {
    std::vector<std::string> words;
    for (const auto& [token, r] : tagged) {
      if (r == role) words.push_back(token);
    }
    std::sort(words.begin(), words.end());
    std::vector<double> acc(table.dim(), 0.0);
    missing = words.empty();
    if (missing) return acc;
    for (const auto& w : words) {
      const auto v = table.lookup(w);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
    }
    for (double& x : acc) x /= static_cast<double>(words.size());
    return acc;
  };
  RoleVectors out;
  out.noun = pooled(Role::noun, out.missing_noun);
  out.verb = pooled(Role::verb, out.missing_verb);
  return out;
}

}  // namespace srcv
