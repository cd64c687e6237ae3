#ifndef CSPHHN_IO_HPP_
#define CSPHHN_IO_HPP_

#include <filesystem>
#include <string>

namespace csphhn {

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over the target, so readers
// never observe a partial file. Throws IoError.
void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& contents);

std::string file_digest(const std::filesystem::path& path);

}  // namespace csphhn

#endif  // CSPHHN_IO_HPP_
