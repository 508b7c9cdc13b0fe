#include "yinyang/midi.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <map>
#include <string>

#include "yinyang/errors.hpp"

namespace yinyang {

namespace {

constexpr std::uint8_t kVelocity = 80;

std::int64_t to_ticks(const Rational& quarters) {
  const Rational ticks = quarters * Rational(kTicksPerQuarter);
  if (ticks.denominator() != 1) throw DataError("timing " + to_string(quarters) + " does not fall on a MIDI tick");
  return ticks.numerator();
}

int sharps_for(const KeySignature& key) {
  static constexpr std::array<int, 12> kMajorSharps{0, -5, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5};
  const int major_tonic = key.mode == Mode::major ? key.tonic : (key.tonic + 3) % 12;
  return kMajorSharps[static_cast<std::size_t>(major_tonic)];
}

KeySignature key_from_sharps(int sharps, bool minor) {
  const int major_tonic = ((sharps * 7) % 12 + 12) % 12;
  if (!minor) return {major_tonic, Mode::major};
  return {(major_tonic + 9) % 12, Mode::minor};
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t value) {
  std::array<std::uint8_t, 5> buf{};
  int n = 0;
  buf[n++] = value & 0x7f;
  while ((value >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>((value & 0x7f) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

void put_be(std::vector<std::uint8_t>& out, std::uint32_t value, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
}

struct Event {
  std::int64_t tick;
  int order;  // meta < note-off < note-on at equal ticks
  std::vector<std::uint8_t> bytes;
};

int log2_exact(int v) {
  int r = 0;
  while ((1 << r) < v) ++r;
  return r;
}

}  // namespace

std::vector<TimedNote> flatten(const Song& song) {
  std::vector<TimedNote> out;
  Rational offset{0};
  for (const auto& phrase : song.phrases) {
    for (const auto& n : phrase.notes) {
      if (!n.is_concrete()) throw DataError("song '" + song.id + "' contains masked notes");
      out.push_back({*n.pitch, offset + n.onset, *n.duration});
    }
    offset += phrase.end();
  }
  return out;
}

std::vector<std::uint8_t> encode_midi(const Song& song) {
  if (song.phrases.empty() || song.note_count() == 0) throw DataError("cannot export an empty song");
  const auto notes = flatten(song);

  std::vector<Event> events;
  Rational offset{0};
  for (std::size_t i = 0; i < song.phrases.size(); ++i) {
    const auto& phrase = song.phrases[i];
    const std::int64_t tick = to_ticks(offset);
    const std::string label = "phrase " + std::to_string(i);
    Event marker{tick, 0, {0xff, 0x06}};
    put_vlq(marker.bytes, static_cast<std::uint32_t>(label.size()));
    marker.bytes.insert(marker.bytes.end(), label.begin(), label.end());
    events.push_back(std::move(marker));
    events.push_back({tick, 0, {0xff, 0x58, 0x04, static_cast<std::uint8_t>(phrase.time.numerator),
                                static_cast<std::uint8_t>(log2_exact(phrase.time.denominator)), 24, 8}});
    events.push_back({tick, 0, {0xff, 0x59, 0x02, static_cast<std::uint8_t>(static_cast<std::int8_t>(sharps_for(phrase.key))),
                                static_cast<std::uint8_t>(phrase.key.mode == Mode::minor ? 1 : 0)}});
    offset += phrase.end();
  }
  for (const auto& n : notes) {
    const auto pitch = static_cast<std::uint8_t>(n.pitch);
    events.push_back({to_ticks(n.onset), 2, {0x90, pitch, kVelocity}});
    events.push_back({to_ticks(n.onset + n.duration), 1, {0x80, pitch, 0}});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.tick != b.tick ? a.tick < b.tick : a.order < b.order;
  });

  std::vector<std::uint8_t> track;
  const std::uint32_t tempo = 60'000'000 / kDefaultTempoBpm;
  track.insert(track.end(), {0x00, 0xff, 0x51, 0x03});
  put_be(track, tempo, 3);
  std::int64_t last = 0;
  for (const auto& e : events) {
    put_vlq(track, static_cast<std::uint32_t>(e.tick - last));
    track.insert(track.end(), e.bytes.begin(), e.bytes.end());
    last = e.tick;
  }
  track.insert(track.end(), {0x00, 0xff, 0x2f, 0x00});

  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  put_be(out, 6, 4);
  put_be(out, 0, 2);  // format 0
  put_be(out, 1, 2);
  put_be(out, kTicksPerQuarter, 2);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_be(out, static_cast<std::uint32_t>(track.size()), 4);
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

void export_midi(const Song& song, const std::filesystem::path& path) {
  const auto bytes = encode_midi(song);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  bool done() const { return pos_ >= end_; }
  std::uint8_t byte() {
    if (pos_ >= end_) throw DataError("truncated MIDI data");
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) throw DataError("truncated MIDI data");
    return bytes_[pos_];
  }
  std::uint32_t be(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | byte();
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = byte();
      v = (v << 7) | (b & 0x7f);
      if ((b & 0x80) == 0) return v;
    }
    throw DataError("bad variable-length quantity");
  }
  void skip(std::size_t n) {
    if (pos_ + n > end_) throw DataError("truncated MIDI data");
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
  std::size_t end_;
};

}  // namespace

MidiContents decode_midi(const std::vector<std::uint8_t>& bytes) {
  Reader header(bytes, 0, bytes.size());
  if (header.be(4) != 0x4d546864) throw DataError("not a standard MIDI file");
  const std::uint32_t header_len = header.be(4);
  header.be(2);  // format
  const std::uint32_t tracks = header.be(2);
  const std::uint32_t division = header.be(2);
  if (division & 0x8000) throw DataError("SMPTE time division is not supported");
  header.skip(header_len - 6);

  MidiContents contents;
  std::map<std::int64_t, MidiPhraseHeader> headers;
  std::map<int, std::deque<std::int64_t>> open;
  std::vector<std::pair<std::int64_t, TimedNote>> notes;
  const auto quarters = [&](std::int64_t ticks) { return Rational(ticks, division); };

  std::size_t pos = header.pos();
  for (std::uint32_t t = 0; t < tracks; ++t) {
    Reader chunk(bytes, pos, bytes.size());
    const std::uint32_t id = chunk.be(4);
    const std::uint32_t len = chunk.be(4);
    const std::size_t body = chunk.pos();
    pos = body + len;
    if (id != 0x4d54726b) continue;
    Reader r(bytes, body, body + len);
    std::int64_t tick = 0;
    std::uint8_t status = 0;
    while (!r.done()) {
      tick += r.vlq();
      if (r.peek() & 0x80) status = r.byte();
      if (status == 0xff) {
        const std::uint8_t type = r.byte();
        const std::uint32_t n = r.vlq();
        std::vector<std::uint8_t> data;
        for (std::uint32_t i = 0; i < n; ++i) data.push_back(r.byte());
        if (type == 0x06) {
          headers[tick].start = quarters(tick);
        } else if (type == 0x58 && n >= 2) {
          headers[tick].time = {data[0], 1 << data[1]};
        } else if (type == 0x59 && n >= 2) {
          headers[tick].key = key_from_sharps(static_cast<std::int8_t>(data[0]), data[1] != 0);
        }
        continue;
      }
      if (status == 0xf0 || status == 0xf7) {
        r.skip(r.vlq());
        continue;
      }
      const std::uint8_t kind = status & 0xf0;
      const std::uint8_t a = r.byte();
      const std::uint8_t b = (kind == 0xc0 || kind == 0xd0) ? 0 : r.byte();
      if (kind == 0x90 && b > 0) {
        open[a].push_back(tick);
      } else if (kind == 0x80 || (kind == 0x90 && b == 0)) {
        auto& q = open[a];
        if (q.empty()) continue;
        const std::int64_t start = q.front();
        q.pop_front();
        notes.push_back({start, TimedNote{a, quarters(start), quarters(tick - start)}});
      }
    }
  }
  std::stable_sort(notes.begin(), notes.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (auto& [tick, note] : notes) contents.notes.push_back(note);
  for (auto& [tick, h] : headers) contents.phrases.push_back(h);
  return contents;
}

MidiContents read_midi(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_midi(bytes);
}

Song song_from_midi(const MidiContents& contents) {
  Song song;
  song.id = "midi";
  auto headers = contents.phrases;
  if (headers.empty()) headers.push_back(MidiPhraseHeader{});
  for (std::size_t i = 0; i < headers.size(); ++i) {
    Phrase p;
    p.key = headers[i].key;
    p.time = headers[i].time;
    p.index_in_song = static_cast<int>(i);
    song.phrases.push_back(p);
  }
  for (const auto& n : contents.notes) {
    std::size_t idx = 0;
    while (idx + 1 < headers.size() && headers[idx + 1].start <= n.onset) ++idx;
    song.phrases[idx].notes.push_back(Note{n.pitch, n.duration, n.onset - headers[idx].start});
  }
  std::erase_if(song.phrases, [](const Phrase& p) { return p.notes.empty(); });
  for (auto& p : song.phrases) p.cadence = derive_cadence(p);
  return song;
}

Song import_midi_song(const std::filesystem::path& path) { return song_from_midi(read_midi(path)); }

}  // namespace yinyang
