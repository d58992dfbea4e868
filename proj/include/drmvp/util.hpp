#pragma once
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace drmvp {

// FNV-1a 64-bit, used for manifest content hashes and config fingerprints
uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64_str(const std::string& s);
uint64_t fnv1a64_file(const std::string& path);
std::string hex64(uint64_t v);

// shortest round-trip decimal (17 significant digits)
std::string format_g17(double v);

// --jobs resolution: explicit flag > DRMVP_JOBS env > hardware_concurrency
int resolve_jobs(int requested);

// static-chunked parallel map; results must be written to preallocated slots
// indexed by the loop variable so output is identical for any job count
void parallel_for(int jobs, int n, const std::function<void(int)>& body);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);   // mkdir -p
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace drmvp
