#include "xauc/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xauc/error.hpp"

namespace xauc {

namespace {

using nlohmann::json;

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    while (in) {
        const int c = in.peek();
        if (c == EOF) break;
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            continue;
        }
        in >> tok;
        break;
    }
    return tok;
}

std::uint8_t quantize(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

std::vector<std::uint8_t> read_pixmap_payload(const std::string& path, const char* magic,
                                              int& height, int& width, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MalformedLine, "cannot open image file '" + path + "'");
    }
    if (next_token(in) != magic) {
        throw Error(ErrorKind::MalformedLine,
                    "file '" + path + "' is not a binary " + magic + " pixmap");
    }
    int maxval = 0;
    try {
        width = std::stoi(next_token(in));
        height = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedLine, "bad pixmap header in '" + path + "'");
    }
    if (width <= 0 || height <= 0 || maxval != 255) {
        throw Error(ErrorKind::MalformedLine,
                    "unsupported pixmap dimensions or maxval in '" + path + "' (need maxval 255)");
    }
    in.get();  // single whitespace byte after maxval
    const std::size_t n =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
    std::vector<std::uint8_t> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw Error(ErrorKind::MalformedLine, "truncated pixel payload in '" + path + "'");
    }
    return bytes;
}

}  // namespace

ImageBuffer ImageBuffer::filled(int height, int width, int channels, double value) {
    ImageBuffer img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    img.data.assign(static_cast<std::size_t>(height) * width * channels, value);
    return img;
}

std::size_t BinaryMask::popcount() const {
    std::size_t n = 0;
    for (std::uint8_t v : data) n += v;
    return n;
}

ImageBuffer load_ppm(const std::string& path) {
    ImageBuffer img;
    img.channels = 3;
    const std::vector<std::uint8_t> bytes =
        read_pixmap_payload(path, "P6", img.height, img.width, 3);
    img.data.resize(bytes.size());
    for (std::size_t k = 0; k < bytes.size(); ++k) {
        img.data[k] = static_cast<double>(bytes[k]) / 255.0;
    }
    return img;
}

void save_ppm(const std::string& path, const ImageBuffer& image) {
    if (image.channels != 3) {
        throw Error(ErrorKind::ShapeMismatch, "PPM output requires a 3-channel image");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::MalformedLine, "cannot write image file '" + path + "'");
    }
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    for (double v : image.data) {
        out.put(static_cast<char>(quantize(v)));
    }
}

SoftMask load_pgm(const std::string& path) {
    SoftMask mask;
    const std::vector<std::uint8_t> bytes =
        read_pixmap_payload(path, "P5", mask.height, mask.width, 1);
    mask.data.resize(bytes.size());
    for (std::size_t k = 0; k < bytes.size(); ++k) {
        mask.data[k] = static_cast<double>(bytes[k]) / 255.0;
    }
    return mask;
}

void save_pgm(const std::string& path, const SoftMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::MalformedLine, "cannot write mask file '" + path + "'");
    }
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    for (double v : mask.data) {
        out.put(static_cast<char>(quantize(v)));
    }
}

void save_pgm(const std::string& path, const BinaryMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::MalformedLine, "cannot write mask file '" + path + "'");
    }
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    for (std::uint8_t v : mask.data) {
        out.put(static_cast<char>(v ? 255 : 0));
    }
}

BinaryMask threshold_mask(const SoftMask& soft, double threshold) {
    BinaryMask mask;
    mask.height = soft.height;
    mask.width = soft.width;
    mask.data.resize(soft.data.size());
    for (std::size_t k = 0; k < soft.data.size(); ++k) {
        mask.data[k] = soft.data[k] > threshold ? 1 : 0;
    }
    return mask;
}

LandmarkSet parse_landmarks(const std::string& json_text, int height, int width,
                            bool* clamped) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_array() || doc.size() != 68) {
        throw Error(ErrorKind::MalformedLine,
                    "landmarks must be a JSON array of 68 [x, y] pairs");
    }
    LandmarkSet set;
    bool any_clamped = false;
    for (std::size_t k = 0; k < 68; ++k) {
        const json& p = doc[k];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            throw Error(ErrorKind::MalformedLine,
                        "landmark " + std::to_string(k) + " is not an [x, y] number pair");
        }
        double x = p[0].get<double>();
        double y = p[1].get<double>();
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw Error(ErrorKind::MalformedLine,
                        "landmark " + std::to_string(k) + " is not finite");
        }
        const double cx = std::clamp(x, 0.0, static_cast<double>(width));
        const double cy = std::clamp(y, 0.0, static_cast<double>(height));
        any_clamped = any_clamped || cx != x || cy != y;
        set.points[k] = {cx, cy};
    }
    if (clamped) *clamped = any_clamped;
    return set;
}

LandmarkSet load_landmarks(const std::string& path, int height, int width, bool* clamped) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::MalformedLine, "cannot open landmarks file '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_landmarks(buffer.str(), height, width, clamped);
}

std::string serialize_landmarks(const LandmarkSet& landmarks) {
    json doc = json::array();
    for (const auto& p : landmarks.points) {
        doc.push_back({p[0], p[1]});
    }
    return doc.dump();
}

}  // namespace xauc
