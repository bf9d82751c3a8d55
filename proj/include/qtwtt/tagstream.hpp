#pragma once
// Time-tag streams: the common currency of the toolkit.
//
// A tag is an int64 timestamp in picoseconds.  A stream couples a sorted
// tag vector with the detector channel it came from and the half-open
// observation window [start_ps, end_ps) it covers.  Streams are immutable
// value types; every transformation returns a new stream.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtwtt {

inline constexpr double kPsPerS = 1e12;

// Detector channel.  D1..D4 are the four standard detectors of the
// two-way link (D1/D2 the remote pair, D3/D4 the local pair); arbitrary
// labels are allowed for intermediate or synthetic streams.
class Channel {
public:
    Channel() = default;
    explicit Channel(std::string label) : label_(std::move(label)) {
        if (label_.empty()) throw std::invalid_argument("Channel: empty label");
    }

    static Channel d1() { return Channel("D1"); }
    static Channel d2() { return Channel("D2"); }
    static Channel d3() { return Channel("D3"); }
    static Channel d4() { return Channel("D4"); }

    // 0..3 for D1..D4, nullopt for anything else.
    std::optional<int> standard_index() const {
        if (label_.size() == 2 && label_[0] == 'D' && label_[1] >= '1' &&
            label_[1] <= '4')
            return label_[1] - '1';
        return std::nullopt;
    }
    static Channel from_standard_index(int i);

    const std::string& label() const { return label_; }

    friend bool operator==(const Channel& a, const Channel& b) {
        return a.label_ == b.label_;
    }
    friend bool operator!=(const Channel& a, const Channel& b) {
        return !(a == b);
    }

private:
    std::string label_ = "D1";
};

// Half-open time interval [start_ps, end_ps), end >= start.
struct Span {
    std::int64_t start_ps = 0;
    std::int64_t end_ps = 0;

    std::int64_t length_ps() const { return end_ps - start_ps; }
    double length_s() const { return static_cast<double>(length_ps()) / kPsPerS; }
    bool contains(std::int64_t t_ps) const {
        return t_ps >= start_ps && t_ps < end_ps;
    }
};

class TimeTagStream {
public:
    TimeTagStream() = default;

    // Tags must be sorted ascending and lie inside span.
    TimeTagStream(Channel channel, std::vector<std::int64_t> tags, Span span);

    // Sorts first, then validates against span.
    static TimeTagStream from_unsorted(Channel channel,
                                       std::vector<std::int64_t> tags,
                                       Span span);

    const Channel& channel() const { return channel_; }
    const std::vector<std::int64_t>& tags() const { return tags_; }
    Span span() const { return span_; }
    std::size_t size() const { return tags_.size(); }
    bool empty() const { return tags_.empty(); }

    // Mean detection rate over the span, Hz.
    double rate_hz() const;

private:
    Channel channel_;
    std::vector<std::int64_t> tags_;
    Span span_;
};

// Tags in [t0_ps, t1_ps); the result's span is exactly that window.
// Requires t0 <= t1.  The window need not intersect the source span.
TimeTagStream slice_window(const TimeTagStream& s, std::int64_t t0_ps,
                           std::int64_t t1_ps);

// Merge two streams of the same channel with overlapping or adjacent
// spans; result covers the union.
TimeTagStream merge(const TimeTagStream& a, const TimeTagStream& b);

// Same tags and span, different channel label.
TimeTagStream with_channel(const TimeTagStream& s, Channel channel);

}  // namespace qtwtt
