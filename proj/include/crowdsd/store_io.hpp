#pragma once

#include <filesystem>
#include <iosfwd>

#include "crowdsd/refinement.hpp"

namespace crowdsd {

// Text format, versioned by its first line ("crowdsd-pseudo-store v1"); see
// docs/file_formats.md. Numbers are written with 17 significant digits so a
// round trip is exact.
void write_store(std::ostream& os, const PseudoBoxStore& store);
PseudoBoxStore read_store(std::istream& is);

void save_store(const std::filesystem::path& path, const PseudoBoxStore& store);
PseudoBoxStore load_store(const std::filesystem::path& path);

}  // namespace crowdsd
