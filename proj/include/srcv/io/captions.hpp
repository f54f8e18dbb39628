#pragma once

// Caption CSV: header `id,video_id,narration,verb_class,noun_classes`;
// noun_classes is space-separated non-negative integers; fields may be
// double-quoted with "" as the escaped quote.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "srcv/text_roles.hpp"

namespace srcv::io {

// Throws ParseError (with line number) and DuplicateId (naming the id).
std::vector<Caption> parse_captions(std::istream& in, const std::string& source = "<stream>");
std::vector<Caption> load_captions(const std::filesystem::path& path);

void write_captions(std::ostream& out, std::span<const Caption> captions);
void save_captions(const std::filesystem::path& path, std::span<const Caption> captions);

}  // namespace srcv::io
