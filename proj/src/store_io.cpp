#include "crowdsd/store_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

constexpr const char* kHeader = "crowdsd-pseudo-store v1";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::istringstream next(const char* what) {
    std::string text;
    while (std::getline(is_, text)) {
      ++line_;
      if (!text.empty()) return std::istringstream(text);
    }
    throw ParseError(std::string("unexpected end of file, expected ") + what, line_ + 1);
  }
  bool at_end() {
    while (is_.peek() == '\n') {
      is_.get();
      ++line_;
    }
    return is_.peek() == std::char_traits<char>::eof();
  }
  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

}  // namespace

void write_store(std::ostream& os, const PseudoBoxStore& store) {
  os << kHeader << '\n' << "epoch " << store.epoch() << '\n';
  for (const ImageRecord& img : store.images()) {
    os << "image " << img.image_id << ' ' << img.boxes.size() << '\n';
    for (const StoredBox& b : img.boxes) {
      os << fmt(b.box.point.x) << ' ' << fmt(b.box.point.y) << ' ' << fmt(b.box.size) << ' '
         << fmt(b.box.prior) << ' ' << b.box.crowdedness << ' ' << fmt(b.box.alpha) << ' '
         << b.last_update_epoch << '\n';
    }
  }
}

PseudoBoxStore read_store(std::istream& is) {
  LineReader reader(is);
  {
    std::string header;
    std::getline(reader.next("header"), header);
    if (header != kHeader) throw ParseError("unknown store header '" + header + "'", reader.line());
  }
  PseudoBoxStore store;
  {
    auto ss = reader.next("epoch line");
    std::string key;
    int epoch = 0;
    if (!(ss >> key >> epoch) || key != "epoch") throw ParseError("expected 'epoch <n>'", reader.line());
    store.set_epoch(epoch);
  }
  while (!reader.at_end()) {
    auto ss = reader.next("image record");
    std::string key;
    ImageRecord rec;
    std::size_t n = 0;
    if (!(ss >> key >> rec.image_id >> n) || key != "image") {
      throw ParseError("expected 'image <id> <count>'", reader.line());
    }
    for (std::size_t j = 0; j < n; ++j) {
      auto bs = reader.next("box line");
      StoredBox b;
      if (!(bs >> b.box.point.x >> b.box.point.y >> b.box.size >> b.box.prior >> b.box.crowdedness >>
            b.box.alpha >> b.last_update_epoch)) {
        throw ParseError("malformed box line", reader.line());
      }
      if (!(b.box.size > 0.0) || !(b.box.prior >= 0.0 && b.box.prior <= 1.0) ||
          b.box.crowdedness < 1) {
        throw ParseError("box values out of range", reader.line());
      }
      rec.boxes.push_back(b);
    }
    const std::size_t line = reader.line();
    try {
      store.restore_image(std::move(rec));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line);
    }
  }
  return store;
}

void save_store(const std::filesystem::path& path, const PseudoBoxStore& store) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write store " + path.string());
  write_store(os, store);
  if (!os) throw IoError("failed writing store " + path.string());
}

PseudoBoxStore load_store(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open store " + path.string());
  return read_store(is);
}

}  // namespace crowdsd
