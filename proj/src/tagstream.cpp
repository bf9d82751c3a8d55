#include "qtwtt/tagstream.hpp"

#include <algorithm>

namespace qtwtt {

Channel Channel::from_standard_index(int i) {
    if (i < 0 || i > 3)
        throw std::invalid_argument("Channel: standard index out of range");
    std::string label = "D0";
    label[1] = static_cast<char>('1' + i);
    return Channel(label);
}

TimeTagStream::TimeTagStream(Channel channel, std::vector<std::int64_t> tags,
                             Span span)
    : channel_(std::move(channel)), tags_(std::move(tags)), span_(span) {
    if (span_.end_ps < span_.start_ps)
        throw std::invalid_argument("TimeTagStream: span end before start");
    if (!std::is_sorted(tags_.begin(), tags_.end()))
        throw std::invalid_argument("TimeTagStream: tags not sorted");
    if (!tags_.empty() &&
        (tags_.front() < span_.start_ps || tags_.back() >= span_.end_ps))
        throw std::invalid_argument("TimeTagStream: tag outside span");
}

TimeTagStream TimeTagStream::from_unsorted(Channel channel,
                                           std::vector<std::int64_t> tags,
                                           Span span) {
    std::sort(tags.begin(), tags.end());
    return TimeTagStream(std::move(channel), std::move(tags), span);
}

double TimeTagStream::rate_hz() const {
    if (span_.length_ps() <= 0) return 0.0;
    return static_cast<double>(tags_.size()) / span_.length_s();
}

TimeTagStream slice_window(const TimeTagStream& s, std::int64_t t0_ps,
                           std::int64_t t1_ps) {
    if (t1_ps < t0_ps)
        throw std::invalid_argument("slice_window: window end before start");
    auto lo = std::lower_bound(s.tags().begin(), s.tags().end(), t0_ps);
    auto hi = std::lower_bound(lo, s.tags().end(), t1_ps);
    return TimeTagStream(s.channel(), std::vector<std::int64_t>(lo, hi),
                         Span{t0_ps, t1_ps});
}

TimeTagStream merge(const TimeTagStream& a, const TimeTagStream& b) {
    if (a.channel() != b.channel())
        throw std::invalid_argument("merge: channel mismatch");
    const Span sa = a.span(), sb = b.span();
    if (sa.start_ps > sb.end_ps || sb.start_ps > sa.end_ps)
        throw std::invalid_argument("merge: spans neither overlap nor touch");
    std::vector<std::int64_t> tags;
    tags.resize(a.size() + b.size());
    std::merge(a.tags().begin(), a.tags().end(), b.tags().begin(),
               b.tags().end(), tags.begin());
    Span u{std::min(sa.start_ps, sb.start_ps), std::max(sa.end_ps, sb.end_ps)};
    return TimeTagStream(a.channel(), std::move(tags), u);
}

TimeTagStream with_channel(const TimeTagStream& s, Channel channel) {
    return TimeTagStream(std::move(channel), s.tags(), s.span());
}

}  // namespace qtwtt
