#pragma once

// Caption parsing into semantic roles: tokenization, lexicon-driven
// noun/verb tagging, and mean-pooled role vectors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace srcv {

struct Caption {
  std::string id;
  std::string video_id;
  std::string text;
  std::size_t verb_class = 0;
  std::vector<std::size_t> noun_classes;  // sorted, unique
};

enum class Role { noun, verb, other };

const char* to_string(Role role) noexcept;

class RoleLexicon {
 public:
  RoleLexicon() = default;

  // Lowercases `token`. A later add() for the same token replaces the tag.
  void add(std::string_view token, Role role);
  Role lookup(std::string_view token) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, Role>& entries() const noexcept { return entries_; }

  // `token<TAB>NOUN|VERB` per line.
  static RoleLexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, Role> entries_;
};

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Deterministic word vector: components uniform in [-0.5, 0.5] from a
// generator seeded with fnv1a64(token) ^ seed.
std::vector<double> hash_embed(std::string_view token, std::size_t dim, std::uint64_t seed);

// Word vectors either loaded from a file or generated by hash_embed. Tokens
// missing from a loaded table fall back to hash_embed with the table seed.
class EmbeddingTable {
 public:
  static EmbeddingTable hashed(std::size_t dim, std::uint64_t seed);
  // `token<TAB>f1 f2 ... fdim` per line.
  static EmbeddingTable load(const std::filesystem::path& path, std::uint64_t fallback_seed = 0);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool is_loaded() const noexcept { return !vectors_.empty(); }
  std::vector<double> lookup(std::string_view token) const;

  // Writes the vectors of `tokens` (as looked up) in the file format above.
  void save(const std::filesystem::path& path, const std::vector<std::string>& tokens) const;

 private:
  EmbeddingTable(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  std::size_t dim_;
  std::uint64_t seed_;
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
};

// Lowercase, split on whitespace and ASCII punctuation. Throws
// TokenizationEmpty when nothing is left and ParseError on invalid UTF-8.
std::vector<std::string> tokenize(std::string_view text);

using TaggedToken = std::pair<std::string, Role>;

std::vector<TaggedToken> tag_roles(const std::vector<std::string>& tokens,
                                   const RoleLexicon& lexicon);

struct RoleVectors {
  std::vector<double> noun;
  std::vector<double> verb;
  bool missing_noun = false;
  bool missing_verb = false;

  bool missing_role() const noexcept { return missing_noun || missing_verb; }
};

// Mean of the NOUN (resp. VERB) token vectors, summed in sorted token order
// so the result does not depend on word order. A role with no tokens yields
// a zero vector and sets its missing flag.
RoleVectors role_vectors(const std::vector<TaggedToken>& tagged, const EmbeddingTable& table);

}  // namespace srcv
