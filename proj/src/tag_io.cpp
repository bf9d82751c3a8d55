#include "qtwtt/tag_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace qtwtt {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'T', 'S'};
constexpr std::uint16_t kVersion = 1;

struct Record {
    std::int64_t t;
    std::uint8_t ch;
};

// Merge streams into one globally sorted record list; ties break by
// channel index so output is a pure function of the input streams.
template <typename ChannelIndex>
std::vector<Record> collect(const std::vector<TimeTagStream>& streams,
                            ChannelIndex index_of) {
    std::vector<Record> recs;
    std::size_t total = 0;
    for (const auto& s : streams) total += s.size();
    recs.reserve(total);
    for (std::size_t si = 0; si < streams.size(); ++si) {
        const auto ch = index_of(streams[si], si);
        for (std::int64_t t : streams[si].tags())
            recs.push_back({t, ch});
    }
    std::sort(recs.begin(), recs.end(), [](const Record& a, const Record& b) {
        return a.t != b.t ? a.t < b.t : a.ch < b.ch;
    });
    return recs;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::map<std::string, TimeTagStream> assemble(
    std::map<std::string, std::vector<std::int64_t>>&& per_channel,
    const char* what) {
    std::map<std::string, TimeTagStream> out;
    for (auto& [label, tags] : per_channel) {
        if (!std::is_sorted(tags.begin(), tags.end()))
            throw TagFormatError(std::string(what) + ": tags not time-sorted");
        Span span{0, 1};
        if (!tags.empty()) span = Span{tags.front(), tags.back() + 1};
        out.emplace(label,
                    TimeTagStream(Channel(label), std::move(tags), span));
    }
    return out;
}

}  // namespace

void write_tags_qtts(const std::vector<TimeTagStream>& streams,
                     const std::filesystem::path& path) {
    const auto recs = collect(
        streams, [](const TimeTagStream& s, std::size_t) -> std::uint8_t {
            const auto idx = s.channel().standard_index();
            if (!idx)
                throw std::invalid_argument(
                    "write_tags_qtts: channel '" + s.channel().label() +
                    "' has no binary encoding (only D1..D4 do)");
            return static_cast<std::uint8_t>(*idx);
        });

    std::string buf;
    buf.reserve(16 + recs.size() * 9);
    buf.append(kMagic, 4);
    put_u16(buf, kVersion);
    put_u16(buf, 0);
    put_u64(buf, recs.size());
    for (const auto& r : recs) {
        buf.push_back(static_cast<char>(r.ch));
        put_u64(buf, static_cast<std::uint64_t>(r.t));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("write_tags_qtts: cannot open " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write_tags_qtts: write failed");
}

std::map<std::string, TimeTagStream> read_tags_qtts(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw TagFormatError("read_tags_qtts: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw TagFormatError("read_tags_qtts: truncated header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw TagFormatError("read_tags_qtts: bad magic");
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::uint16_t version =
        static_cast<std::uint16_t>(p[4] | (p[5] << 8));
    if (version != kVersion)
        throw TagFormatError("read_tags_qtts: unsupported version " +
                             std::to_string(version));
    const std::uint64_t count = get_u64(p + 8);
    if (buf.size() != 16 + count * 9)
        throw TagFormatError("read_tags_qtts: truncated record section");

    std::map<std::string, std::vector<std::int64_t>> per_channel;
    for (std::uint64_t i = 0; i < count; ++i) {
        const unsigned char* r = p + 16 + i * 9;
        const std::uint8_t ch = r[0];
        if (ch > 3)
            throw TagFormatError("read_tags_qtts: channel byte out of range");
        const auto t = static_cast<std::int64_t>(get_u64(r + 1));
        per_channel[Channel::from_standard_index(ch).label()].push_back(t);
    }
    return assemble(std::move(per_channel), "read_tags_qtts");
}

void write_tags_csv(const std::vector<TimeTagStream>& streams,
                    const std::filesystem::path& path) {
    const auto recs =
        collect(streams, [](const TimeTagStream&, std::size_t si) {
            return static_cast<std::uint8_t>(si);
        });
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("write_tags_csv: cannot open " + path.string());
    out << "channel,time_ps\n";
    for (const auto& r : recs)
        out << streams[r.ch].channel().label() << ',' << r.t << '\n';
    if (!out) throw std::runtime_error("write_tags_csv: write failed");
}

std::map<std::string, TimeTagStream> read_tags_csv(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TagFormatError("read_tags_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "channel,time_ps")
        throw TagFormatError("read_tags_csv: missing 'channel,time_ps' header");
    std::map<std::string, std::vector<std::int64_t>> per_channel;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0)
            throw TagFormatError("read_tags_csv: malformed line " +
                                 std::to_string(lineno));
        const std::string label = line.substr(0, comma);
        std::int64_t t = 0;
        try {
            t = std::stoll(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw TagFormatError("read_tags_csv: bad timestamp on line " +
                                 std::to_string(lineno));
        }
        per_channel[label].push_back(t);
    }
    return assemble(std::move(per_channel), "read_tags_csv");
}

void write_tags(const std::vector<TimeTagStream>& streams,
                const std::filesystem::path& path) {
    if (path.extension() == ".csv") write_tags_csv(streams, path);
    else write_tags_qtts(streams, path);
}

std::map<std::string, TimeTagStream> read_tags(
    const std::filesystem::path& path) {
    if (path.extension() == ".csv") return read_tags_csv(path);
    return read_tags_qtts(path);
}

}  // namespace qtwtt
