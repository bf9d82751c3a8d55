#pragma once
// Tag stream persistence.
//
// Binary container (extension .qtts): little-endian, magic "QTTS",
// u16 version (currently 1), u16 reserved zero, u64 record count, then
// count records of { u8 channel, i64 time_ps } with channel 0..3 mapping
// to D1..D4.  Records are globally time-sorted (ties ordered by channel).
// The CSV alternative has header "channel,time_ps" and the same ordering,
// but accepts arbitrary channel labels.  Neither format stores the
// observation span; on read it is taken as the hull of the tags present.

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtwtt/tagstream.hpp"

namespace qtwtt {

class TagFormatError : public std::runtime_error {
public:
    explicit TagFormatError(const std::string& what)
        : std::runtime_error(what) {}
};

// Dispatches on extension: ".csv" text, anything else binary.
void write_tags(const std::vector<TimeTagStream>& streams,
                const std::filesystem::path& path);
std::map<std::string, TimeTagStream> read_tags(
    const std::filesystem::path& path);

void write_tags_qtts(const std::vector<TimeTagStream>& streams,
                     const std::filesystem::path& path);
std::map<std::string, TimeTagStream> read_tags_qtts(
    const std::filesystem::path& path);

void write_tags_csv(const std::vector<TimeTagStream>& streams,
                    const std::filesystem::path& path);
std::map<std::string, TimeTagStream> read_tags_csv(
    const std::filesystem::path& path);

}  // namespace qtwtt
