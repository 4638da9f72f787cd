#include "mvsfuse/model_io.hpp"

#include <png.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvsfuse/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary readers/writers assume a little-endian host");

namespace mvsfuse {
namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return std::move(ss).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on '" + path + "'");
}

std::string fmt_g(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

// ---------------------------------------------------------------- PLY

enum class PlyType { kChar, kUChar, kShort, kUShort, kInt, kUInt, kFloat, kDouble };

std::size_t ply_type_size(PlyType t) {
    switch (t) {
        case PlyType::kChar:
        case PlyType::kUChar: return 1;
        case PlyType::kShort:
        case PlyType::kUShort: return 2;
        case PlyType::kInt:
        case PlyType::kUInt:
        case PlyType::kFloat: return 4;
        case PlyType::kDouble: return 8;
    }
    return 0;
}

PlyType parse_ply_type(const std::string& token, std::size_t line) {
    if (token == "char" || token == "int8") return PlyType::kChar;
    if (token == "uchar" || token == "uint8") return PlyType::kUChar;
    if (token == "short" || token == "int16") return PlyType::kShort;
    if (token == "ushort" || token == "uint16") return PlyType::kUShort;
    if (token == "int" || token == "int32") return PlyType::kInt;
    if (token == "uint" || token == "uint32") return PlyType::kUInt;
    if (token == "float" || token == "float32") return PlyType::kFloat;
    if (token == "double" || token == "float64") return PlyType::kDouble;
    throw ParseError::at_line("unknown property type '" + token + "'", line);
}

struct PlyProperty {
    std::string name;
    PlyType type = PlyType::kDouble;
    bool is_list = false;
    PlyType count_type = PlyType::kUChar;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

struct PlyHeader {
    bool binary = false;
    std::vector<PlyElement> elements;
    std::size_t data_offset = 0;  // first byte after end_header
    std::size_t header_lines = 0;
};

PlyHeader parse_ply_header(const std::string& buf) {
    PlyHeader hdr;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool saw_format = false;
    bool done = false;

    while (!done) {
        const std::size_t eol = buf.find('\n', pos);
        if (eol == std::string::npos) {
            throw ParseError::at_line("header has no end_header", line_no + 1);
        }
        std::string line = buf.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = eol + 1;
        ++line_no;

        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (line_no == 1) {
            if (line != "ply") throw ParseError::at_line("missing 'ply' magic", 1);
            continue;
        }
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt, ver;
            ss >> fmt >> ver;
            if (ver != "1.0") throw ParseError::at_line("unsupported version '" + ver + "'", line_no);
            if (fmt == "ascii") {
                hdr.binary = false;
            } else if (fmt == "binary_little_endian") {
                hdr.binary = true;
            } else {
                throw ParseError::at_line("unsupported format '" + fmt + "'", line_no);
            }
            saw_format = true;
        } else if (kw == "element") {
            PlyElement el;
            long long count = -1;
            ss >> el.name >> count;
            if (ss.fail() || el.name.empty() || count < 0) {
                throw ParseError::at_line("malformed element declaration", line_no);
            }
            el.count = static_cast<std::size_t>(count);
            hdr.elements.push_back(std::move(el));
        } else if (kw == "property") {
            if (hdr.elements.empty()) {
                throw ParseError::at_line("property before any element", line_no);
            }
            std::string t1;
            ss >> t1;
            PlyProperty prop;
            if (t1 == "list") {
                std::string ct, it;
                ss >> ct >> it >> prop.name;
                if (ss.fail() || prop.name.empty()) {
                    throw ParseError::at_line("malformed list property", line_no);
                }
                prop.is_list = true;
                prop.count_type = parse_ply_type(ct, line_no);
                prop.type = parse_ply_type(it, line_no);
            } else {
                ss >> prop.name;
                if (ss.fail() || prop.name.empty()) {
                    throw ParseError::at_line("malformed property", line_no);
                }
                prop.type = parse_ply_type(t1, line_no);
            }
            hdr.elements.back().props.push_back(std::move(prop));
        } else if (kw == "end_header") {
            done = true;
        } else {
            throw ParseError::at_line("unknown header keyword '" + kw + "'", line_no);
        }
    }
    if (!saw_format) throw ParseError::at_line("header lacks a format line", line_no);
    hdr.data_offset = pos;
    hdr.header_lines = line_no;
    return hdr;
}

class Cursor {
  public:
    Cursor(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}

    const char* take(std::size_t n) {
        if (pos_ + n > buf_.size()) {
            throw ParseError::at_byte("unexpected end of file", pos_);
        }
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

  private:
    const std::string& buf_;
    std::size_t pos_;
};

double read_scalar_le(Cursor& cur, PlyType t) {
    switch (t) {
        case PlyType::kChar: {
            std::int8_t v;
            std::memcpy(&v, cur.take(1), 1);
            return v;
        }
        case PlyType::kUChar: {
            std::uint8_t v;
            std::memcpy(&v, cur.take(1), 1);
            return v;
        }
        case PlyType::kShort: {
            std::int16_t v;
            std::memcpy(&v, cur.take(2), 2);
            return v;
        }
        case PlyType::kUShort: {
            std::uint16_t v;
            std::memcpy(&v, cur.take(2), 2);
            return v;
        }
        case PlyType::kInt: {
            std::int32_t v;
            std::memcpy(&v, cur.take(4), 4);
            return v;
        }
        case PlyType::kUInt: {
            std::uint32_t v;
            std::memcpy(&v, cur.take(4), 4);
            return v;
        }
        case PlyType::kFloat: {
            float v;
            std::memcpy(&v, cur.take(4), 4);
            return v;
        }
        case PlyType::kDouble: {
            double v;
            std::memcpy(&v, cur.take(8), 8);
            return v;
        }
    }
    return 0.0;
}

double parse_ascii_scalar(std::istringstream& ss, std::size_t line) {
    double v;
    ss >> v;
    if (ss.fail()) throw ParseError::at_line("expected a number", line);
    return v;
}

// Streams every row of one element through `scalar`, called as
// scalar(prop_index, value); list payloads go to `list_item` after
// list_begin(prop_index, count). Any callback may be a no-op.
template <typename ScalarFn, typename ListBeginFn, typename ListItemFn>
void read_ply_element(const std::string& buf, const PlyHeader& hdr, const PlyElement& el,
                      Cursor& cur, std::size_t& ascii_line, ScalarFn scalar,
                      ListBeginFn list_begin, ListItemFn list_item) {
    if (hdr.binary) {
        for (std::size_t row = 0; row < el.count; ++row) {
            for (std::size_t pi = 0; pi < el.props.size(); ++pi) {
                const PlyProperty& p = el.props[pi];
                if (p.is_list) {
                    const double cd = read_scalar_le(cur, p.count_type);
                    if (cd < 0 || cd > 1e9) {
                        throw ParseError::at_byte("implausible list count", cur.pos());
                    }
                    const auto n = static_cast<std::size_t>(cd);
                    list_begin(pi, n);
                    for (std::size_t k = 0; k < n; ++k) {
                        list_item(pi, read_scalar_le(cur, p.type));
                    }
                } else {
                    scalar(pi, read_scalar_le(cur, p.type));
                }
            }
        }
        return;
    }

    // ascii: one row per line, blank lines allowed only between rows
    std::size_t pos = cur.pos();
    for (std::size_t row = 0; row < el.count; ++row) {
        std::size_t eol;
        std::string line;
        do {
            if (pos >= buf.size()) {
                throw ParseError::at_line("unexpected end of file", ascii_line + 1);
            }
            eol = buf.find('\n', pos);
            if (eol == std::string::npos) eol = buf.size();
            line = buf.substr(pos, eol - pos);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            pos = eol + 1;
            ++ascii_line;
        } while (line.find_first_not_of(" \t") == std::string::npos);

        std::istringstream ss(line);
        for (std::size_t pi = 0; pi < el.props.size(); ++pi) {
            const PlyProperty& p = el.props[pi];
            if (p.is_list) {
                const double cd = parse_ascii_scalar(ss, ascii_line);
                if (cd < 0 || cd > 1e9) {
                    throw ParseError::at_line("implausible list count", ascii_line);
                }
                const auto n = static_cast<std::size_t>(cd);
                list_begin(pi, n);
                for (std::size_t k = 0; k < n; ++k) {
                    list_item(pi, parse_ascii_scalar(ss, ascii_line));
                }
            } else {
                scalar(pi, parse_ascii_scalar(ss, ascii_line));
            }
        }
    }
    // reposition the byte cursor past the consumed lines
    cur.take(pos > buf.size() ? cur.remaining() : pos - cur.pos());
}

int find_prop(const PlyElement& el, const char* name) {
    for (std::size_t i = 0; i < el.props.size(); ++i) {
        if (!el.props[i].is_list && el.props[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

struct VertexLayout {
    int x = -1, y = -1, z = -1;
    int nx = -1, ny = -1, nz = -1;
    int r = -1, g = -1, b = -1;
    bool has_normals = false;
    bool has_colors = false;
};

VertexLayout vertex_layout(const PlyElement& el) {
    VertexLayout lay;
    lay.x = find_prop(el, "x");
    lay.y = find_prop(el, "y");
    lay.z = find_prop(el, "z");
    if (lay.x < 0 || lay.y < 0 || lay.z < 0) {
        throw MissingPositions("vertex element lacks x/y/z properties");
    }
    lay.nx = find_prop(el, "nx");
    lay.ny = find_prop(el, "ny");
    lay.nz = find_prop(el, "nz");
    lay.has_normals = lay.nx >= 0 && lay.ny >= 0 && lay.nz >= 0;
    lay.r = find_prop(el, "red");
    lay.g = find_prop(el, "green");
    lay.b = find_prop(el, "blue");
    lay.has_colors = lay.r >= 0 && lay.g >= 0 && lay.b >= 0;
    return lay;
}

const PlyElement* find_element(const PlyHeader& hdr, const char* name) {
    for (const PlyElement& el : hdr.elements) {
        if (el.name == name) return &el;
    }
    return nullptr;
}

// Binary elements before `stop` are consumed row by row; ascii rows are lines.
void skip_elements_until(const std::string& buf, const PlyHeader& hdr, const PlyElement* stop,
                         Cursor& cur, std::size_t& ascii_line) {
    for (const PlyElement& el : hdr.elements) {
        if (&el == stop) return;
        read_ply_element(buf, hdr, el, cur, ascii_line, [](std::size_t, double) {},
                         [](std::size_t, std::size_t) {}, [](std::size_t, double) {});
    }
}

std::uint8_t quantize_color(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void append_double_le(std::string& out, double v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

void append_int32_le(std::string& out, std::int32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

std::string ply_vertex_header(PlyFormat format, std::size_t count, bool normals, bool colors) {
    std::string h = "ply\n";
    h += format == PlyFormat::kAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
    h += "element vertex " + std::to_string(count) + "\n";
    h += "property double x\nproperty double y\nproperty double z\n";
    if (normals) h += "property double nx\nproperty double ny\nproperty double nz\n";
    if (colors) h += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    return h;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path) {
    const std::string buf = read_file(path);
    const PlyHeader hdr = parse_ply_header(buf);
    const PlyElement* vertex = find_element(hdr, "vertex");
    if (!vertex) throw MissingPositions("'" + path + "' has no vertex element");
    // Every row costs at least one data byte; larger counts are corruption.
    if (vertex->count > buf.size()) {
        throw ParseError::at_line("implausible vertex count " + std::to_string(vertex->count),
                                  hdr.header_lines);
    }

    Cursor cur(buf, hdr.data_offset);
    std::size_t ascii_line = hdr.header_lines;
    skip_elements_until(buf, hdr, vertex, cur, ascii_line);

    const VertexLayout lay = vertex_layout(*vertex);
    PointCloud cloud;
    cloud.positions.resize(vertex->count);
    if (lay.has_normals) cloud.normals.resize(vertex->count);
    if (lay.has_colors) cloud.colors.resize(vertex->count);

    std::size_t row = 0;
    std::vector<double> vals(vertex->props.size(), 0.0);
    std::size_t props_seen = 0;
    auto flush_row = [&]() {
        if (++props_seen < vertex->props.size()) return;
        auto get = [&](int idx) { return vals[static_cast<std::size_t>(idx)]; };
        cloud.positions[row] = {get(lay.x), get(lay.y), get(lay.z)};
        if (lay.has_normals) cloud.normals[row] = {get(lay.nx), get(lay.ny), get(lay.nz)};
        if (lay.has_colors) cloud.colors[row] = {get(lay.r), get(lay.g), get(lay.b)};
        ++row;
        props_seen = 0;
    };
    read_ply_element(
        buf, hdr, *vertex, cur, ascii_line,
        [&](std::size_t pi, double v) {
            vals[pi] = v;
            flush_row();
        },
        [&](std::size_t, std::size_t) { flush_row(); }, [](std::size_t, double) {});
    return cloud;
}

void save_point_cloud(const PointCloud& cloud, const std::string& path, PlyFormat format) {
    cloud.validate();
    std::string out =
        ply_vertex_header(format, cloud.size(), cloud.has_normals(), cloud.has_colors());
    out += "end_header\n";

    if (format == PlyFormat::kBinaryLittleEndian) {
        const std::size_t stride = 24 + (cloud.has_normals() ? 24 : 0) +
                                   (cloud.has_colors() ? 3 : 0);
        out.reserve(out.size() + stride * cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            for (int a = 0; a < 3; ++a) append_double_le(out, cloud.positions[i][a]);
            if (cloud.has_normals()) {
                for (int a = 0; a < 3; ++a) append_double_le(out, cloud.normals[i][a]);
            }
            if (cloud.has_colors()) {
                for (int a = 0; a < 3; ++a) {
                    out.push_back(static_cast<char>(quantize_color(cloud.colors[i][a])));
                }
            }
        }
    } else {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            out += fmt_g(cloud.positions[i][0], 17);
            out += ' ';
            out += fmt_g(cloud.positions[i][1], 17);
            out += ' ';
            out += fmt_g(cloud.positions[i][2], 17);
            if (cloud.has_normals()) {
                for (int a = 0; a < 3; ++a) {
                    out += ' ';
                    out += fmt_g(cloud.normals[i][a], 17);
                }
            }
            if (cloud.has_colors()) {
                for (int a = 0; a < 3; ++a) {
                    out += ' ';
                    out += std::to_string(quantize_color(cloud.colors[i][a]));
                }
            }
            out += '\n';
        }
    }
    write_file(path, out);
}

TriangleMesh load_mesh(const std::string& path) {
    const std::string buf = read_file(path);
    const PlyHeader hdr = parse_ply_header(buf);
    const PlyElement* vertex = find_element(hdr, "vertex");
    if (!vertex) throw MissingPositions("'" + path + "' has no vertex element");
    if (vertex->count > buf.size()) {
        throw ParseError::at_line("implausible vertex count " + std::to_string(vertex->count),
                                  hdr.header_lines);
    }
    const PlyElement* face = find_element(hdr, "face");

    Cursor cur(buf, hdr.data_offset);
    std::size_t ascii_line = hdr.header_lines;
    skip_elements_until(buf, hdr, vertex, cur, ascii_line);

    const VertexLayout lay = vertex_layout(*vertex);
    TriangleMesh mesh;
    mesh.vertices.resize(vertex->count);
    if (lay.has_colors) mesh.vertex_colors.resize(vertex->count);

    std::size_t row = 0;
    std::vector<double> vals(vertex->props.size(), 0.0);
    std::size_t props_seen = 0;
    auto flush_row = [&]() {
        if (++props_seen < vertex->props.size()) return;
        auto get = [&](int idx) { return vals[static_cast<std::size_t>(idx)]; };
        mesh.vertices[row] = {get(lay.x), get(lay.y), get(lay.z)};
        if (lay.has_colors) mesh.vertex_colors[row] = {get(lay.r), get(lay.g), get(lay.b)};
        ++row;
        props_seen = 0;
    };
    read_ply_element(
        buf, hdr, *vertex, cur, ascii_line,
        [&](std::size_t pi, double v) {
            vals[pi] = v;
            flush_row();
        },
        [&](std::size_t, std::size_t) { flush_row(); }, [](std::size_t, double) {});

    if (face) {
        // elements between vertex and face are consumed by the generic reader
        bool skipping = false;
        for (const PlyElement& el : hdr.elements) {
            if (&el == vertex) {
                skipping = true;
                continue;
            }
            if (&el == face) break;
            if (skipping) {
                read_ply_element(buf, hdr, el, cur, ascii_line, [](std::size_t, double) {},
                                 [](std::size_t, std::size_t) {}, [](std::size_t, double) {});
            }
        }

        int list_prop = -1;
        for (std::size_t i = 0; i < face->props.size(); ++i) {
            if (face->props[i].is_list &&
                (face->props[i].name == "vertex_indices" || face->props[i].name == "vertex_index")) {
                list_prop = static_cast<int>(i);
            }
        }
        if (list_prop < 0) {
            throw ParseError::at_line("face element lacks a vertex_indices list",
                                      hdr.header_lines);
        }

        if (face->count > buf.size()) {
            throw ParseError::at_line("implausible face count " + std::to_string(face->count),
                                      hdr.header_lines);
        }
        mesh.faces.reserve(face->count);
        std::vector<int> current;
        read_ply_element(
            buf, hdr, *face, cur, ascii_line, [](std::size_t, double) {},
            [&](std::size_t pi, std::size_t n) {
                if (static_cast<int>(pi) != list_prop) return;
                if (n != 3) {
                    throw ParseError::at_byte("non-triangular face with " + std::to_string(n) +
                                                  " indices",
                                              cur.pos());
                }
                current.clear();
            },
            [&](std::size_t pi, double v) {
                if (static_cast<int>(pi) != list_prop) return;
                current.push_back(static_cast<int>(v));
                if (current.size() == 3) {
                    mesh.faces.push_back({current[0], current[1], current[2]});
                }
            });
    }

    mesh.validate();
    return mesh;
}

void save_mesh(const TriangleMesh& mesh, const std::string& path, PlyFormat format) {
    mesh.validate();
    const bool colors = !mesh.vertex_colors.empty();
    std::string out = ply_vertex_header(format, mesh.vertices.size(), false, colors);
    out += "element face " + std::to_string(mesh.faces.size()) + "\n";
    out += "property list uchar int vertex_indices\n";
    out += "end_header\n";

    if (format == PlyFormat::kBinaryLittleEndian) {
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            for (int a = 0; a < 3; ++a) append_double_le(out, mesh.vertices[i][a]);
            if (colors) {
                for (int a = 0; a < 3; ++a) {
                    out.push_back(static_cast<char>(quantize_color(mesh.vertex_colors[i][a])));
                }
            }
        }
        for (const auto& f : mesh.faces) {
            out.push_back(3);
            for (int a = 0; a < 3; ++a) append_int32_le(out, f[a]);
        }
    } else {
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            out += fmt_g(mesh.vertices[i][0], 17);
            out += ' ';
            out += fmt_g(mesh.vertices[i][1], 17);
            out += ' ';
            out += fmt_g(mesh.vertices[i][2], 17);
            if (colors) {
                for (int a = 0; a < 3; ++a) {
                    out += ' ';
                    out += std::to_string(quantize_color(mesh.vertex_colors[i][a]));
                }
            }
            out += '\n';
        }
        for (const auto& f : mesh.faces) {
            out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' +
                   std::to_string(f[2]) + '\n';
        }
    }
    write_file(path, out);
}

// ---------------------------------------------------------------- COLMAP

void ColmapModel::validate() const {
    for (const auto& [id, cam] : cameras) {
        if (cam.camera_id != id) {
            throw InvariantViolation("camera map key " + std::to_string(id) +
                                     " disagrees with camera_id");
        }
    }
    for (const auto& [id, img] : images) {
        if (img.image_id != id) {
            throw InvariantViolation("image map key " + std::to_string(id) +
                                     " disagrees with image_id");
        }
        if (!cameras.count(img.camera_id)) {
            throw InvariantViolation("image " + std::to_string(id) +
                                     " references missing camera " +
                                     std::to_string(img.camera_id));
        }
        for (const ColmapObservation& obs : img.points2d) {
            if (obs.point3d_id != -1 && !points3d.count(obs.point3d_id)) {
                throw InvariantViolation("image " + std::to_string(id) +
                                         " observes missing point " +
                                         std::to_string(obs.point3d_id));
            }
        }
    }
    for (const auto& [id, pt] : points3d) {
        if (pt.point3d_id != id) {
            throw InvariantViolation("point map key " + std::to_string(id) +
                                     " disagrees with point3d_id");
        }
        for (const ColmapTrackEntry& te : pt.track) {
            auto it = images.find(te.image_id);
            if (it == images.end()) {
                throw InvariantViolation("point " + std::to_string(id) +
                                         " tracks missing image " +
                                         std::to_string(te.image_id));
            }
            if (te.point2d_idx < 0 ||
                static_cast<std::size_t>(te.point2d_idx) >= it->second.points2d.size()) {
                throw InvariantViolation("point " + std::to_string(id) +
                                         " tracks out-of-range 2D index " +
                                         std::to_string(te.point2d_idx));
            }
        }
    }
}

namespace {

bool is_blank_or_comment(const std::string& line) {
    const std::size_t i = line.find_first_not_of(" \t");
    return i == std::string::npos || line[i] == '#';
}

void parse_cameras_txt(const std::string& text, ColmapModel& model) {
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (is_blank_or_comment(lines[li])) continue;
        std::istringstream ss(lines[li]);
        ColmapCamera cam;
        ss >> cam.camera_id >> cam.model >> cam.width >> cam.height;
        if (ss.fail() || cam.width < 1 || cam.height < 1) {
            throw ParseError::at_line("malformed camera line", li + 1);
        }
        double p;
        while (ss >> p) cam.params.push_back(p);
        std::size_t expected;
        if (cam.model == "PINHOLE") {
            expected = 4;
        } else if (cam.model == "SIMPLE_PINHOLE") {
            expected = 3;
        } else {
            throw UnsupportedCameraModel("camera model '" + cam.model + "' (line " +
                                         std::to_string(li + 1) + ")");
        }
        if (cam.params.size() != expected) {
            throw ParseError::at_line("camera model " + cam.model + " expects " +
                                          std::to_string(expected) + " params, got " +
                                          std::to_string(cam.params.size()),
                                      li + 1);
        }
        if (!model.cameras.emplace(cam.camera_id, cam).second) {
            throw ParseError::at_line("duplicate camera id " + std::to_string(cam.camera_id),
                                      li + 1);
        }
    }
}

void parse_images_txt(const std::string& text, ColmapModel& model) {
    const auto lines = split_lines(text);
    std::size_t li = 0;
    while (li < lines.size()) {
        if (is_blank_or_comment(lines[li])) {
            ++li;
            continue;
        }
        const std::size_t header_line = li + 1;
        std::istringstream ss(lines[li]);
        ColmapImage img;
        ss >> img.image_id >> img.quat[0] >> img.quat[1] >> img.quat[2] >> img.quat[3] >>
            img.t[0] >> img.t[1] >> img.t[2] >> img.camera_id;
        if (ss.fail()) throw ParseError::at_line("malformed image line", header_line);
        std::getline(ss, img.name);
        const std::size_t s = img.name.find_first_not_of(" \t");
        img.name = s == std::string::npos ? std::string() : img.name.substr(s);
        if (img.name.empty()) throw ParseError::at_line("image line lacks a name", header_line);
        const double qnorm = img.quat.norm();
        if (std::abs(qnorm - 1.0) > 1e-6) {
            throw ParseError::at_line("quaternion of image " + std::to_string(img.image_id) +
                                          " is not unit length",
                                      header_line);
        }
        img.quat /= qnorm;

        // the observations line follows immediately; blank means none
        ++li;
        while (li < lines.size()) {
            const std::size_t i = lines[li].find_first_not_of(" \t");
            if (i != std::string::npos && lines[li][i] == '#') {
                ++li;
                continue;
            }
            break;
        }
        if (li < lines.size()) {
            std::istringstream os(lines[li]);
            double x, y;
            long long pid;
            while (os >> x) {
                if (!(os >> y >> pid)) {
                    throw ParseError::at_line("observation list not in (x y id) triples",
                                              li + 1);
                }
                ColmapObservation obs;
                obs.xy = {x, y};
                obs.point3d_id = pid;
                img.points2d.push_back(obs);
            }
            ++li;
        }
        if (!model.images.emplace(img.image_id, std::move(img)).second) {
            throw ParseError::at_line("duplicate image id", header_line);
        }
    }
}

void parse_points3d_txt(const std::string& text, ColmapModel& model) {
    const auto lines = split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (is_blank_or_comment(lines[li])) continue;
        std::istringstream ss(lines[li]);
        ColmapPoint pt;
        int r, g, b;
        ss >> pt.point3d_id >> pt.xyz[0] >> pt.xyz[1] >> pt.xyz[2] >> r >> g >> b >> pt.error;
        if (ss.fail()) throw ParseError::at_line("malformed point line", li + 1);
        if (r < 0 || r > 255 || g < 0 || g > 255 || b < 0 || b > 255) {
            throw ParseError::at_line("color out of [0,255]", li + 1);
        }
        pt.rgb = {r, g, b};
        int image_id;
        while (ss >> image_id) {
            ColmapTrackEntry te;
            te.image_id = image_id;
            if (!(ss >> te.point2d_idx)) {
                throw ParseError::at_line("track not in (image_id point2d_idx) pairs", li + 1);
            }
            pt.track.push_back(te);
        }
        if (!model.points3d.emplace(pt.point3d_id, std::move(pt)).second) {
            throw ParseError::at_line("duplicate point id", li + 1);
        }
    }
}

}  // namespace

ColmapModel load_colmap_model(const std::string& dir) {
    ColmapModel model;
    parse_cameras_txt(read_file((fs::path(dir) / "cameras.txt").string()), model);
    parse_images_txt(read_file((fs::path(dir) / "images.txt").string()), model);
    parse_points3d_txt(read_file((fs::path(dir) / "points3D.txt").string()), model);
    model.validate();
    return model;
}

void save_colmap_model(const ColmapModel& model, const std::string& dir) {
    model.validate();
    fs::create_directories(dir);

    std::string cams = "# Camera list with one line of data per camera:\n";
    cams += "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    cams += "# Number of cameras: " + std::to_string(model.cameras.size()) + "\n";
    for (const auto& [id, cam] : model.cameras) {
        cams += std::to_string(id) + " " + cam.model + " " + std::to_string(cam.width) + " " +
                std::to_string(cam.height);
        for (double p : cam.params) {
            cams += ' ';
            cams += fmt_g(p, 12);
        }
        cams += '\n';
    }
    write_file((fs::path(dir) / "cameras.txt").string(), cams);

    std::string imgs = "# Image list with two lines of data per image:\n";
    imgs += "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
    imgs += "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    imgs += "# Number of images: " + std::to_string(model.images.size()) + "\n";
    for (const auto& [id, img] : model.images) {
        imgs += std::to_string(id);
        for (int a = 0; a < 4; ++a) {
            imgs += ' ';
            imgs += fmt_g(img.quat[a], 12);
        }
        for (int a = 0; a < 3; ++a) {
            imgs += ' ';
            imgs += fmt_g(img.t[a], 12);
        }
        imgs += ' ' + std::to_string(img.camera_id) + ' ' + img.name + '\n';
        for (std::size_t i = 0; i < img.points2d.size(); ++i) {
            if (i) imgs += ' ';
            imgs += fmt_g(img.points2d[i].xy[0], 12);
            imgs += ' ';
            imgs += fmt_g(img.points2d[i].xy[1], 12);
            imgs += ' ';
            imgs += std::to_string(img.points2d[i].point3d_id);
        }
        imgs += '\n';
    }
    write_file((fs::path(dir) / "images.txt").string(), imgs);

    std::string pts = "# 3D point list with one line of data per point:\n";
    pts += "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    pts += "# Number of points: " + std::to_string(model.points3d.size()) + "\n";
    for (const auto& [id, pt] : model.points3d) {
        pts += std::to_string(id);
        for (int a = 0; a < 3; ++a) {
            pts += ' ';
            pts += fmt_g(pt.xyz[a], 12);
        }
        for (int a = 0; a < 3; ++a) {
            pts += ' ' + std::to_string(pt.rgb[a]);
        }
        pts += ' ';
        pts += fmt_g(pt.error, 12);
        for (const ColmapTrackEntry& te : pt.track) {
            pts += ' ' + std::to_string(te.image_id) + ' ' + std::to_string(te.point2d_idx);
        }
        pts += '\n';
    }
    write_file((fs::path(dir) / "points3D.txt").string(), pts);
}

std::vector<CameraPose> camera_poses(const ColmapModel& model) {
    model.validate();
    std::vector<CameraPose> poses;
    poses.reserve(model.images.size());
    for (const auto& [id, img] : model.images) {
        const ColmapCamera& cam = model.cameras.at(img.camera_id);
        Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
        if (cam.model == "PINHOLE") {
            K(0, 0) = cam.params[0];
            K(1, 1) = cam.params[1];
            K(0, 2) = cam.params[2];
            K(1, 2) = cam.params[3];
        } else if (cam.model == "SIMPLE_PINHOLE") {
            K(0, 0) = K(1, 1) = cam.params[0];
            K(0, 2) = cam.params[1];
            K(1, 2) = cam.params[2];
        } else {
            throw UnsupportedCameraModel("camera model '" + cam.model + "'");
        }
        const Eigen::Quaterniond q(img.quat[0], img.quat[1], img.quat[2], img.quat[3]);
        const std::size_t dot = img.name.rfind('.');
        const std::string pose_id = dot == std::string::npos ? img.name : img.name.substr(0, dot);
        poses.emplace_back(pose_id, K, q.toRotationMatrix(), img.t, cam.width, cam.height);
    }
    return poses;
}

ColmapModel colmap_from_tracks(const std::vector<CameraPose>& cams, const PointCloud& cloud,
                               const DistributedPoints& tracks) {
    if (tracks.views.size() != cams.size()) {
        throw InvalidArgument("colmap_from_tracks: view count does not match camera count");
    }
    if (tracks.point_ids.size() != cloud.size()) {
        throw InvalidArgument("colmap_from_tracks: point id count does not match cloud");
    }

    ColmapModel model;
    for (std::size_t ci = 0; ci < cams.size(); ++ci) {
        const CameraPose& cam = cams[ci];
        if (cam.K(0, 1) != 0.0) {
            throw UnsupportedCameraModel("camera '" + cam.id + "' has skew; PINHOLE cannot");
        }
        const int id = static_cast<int>(ci) + 1;
        ColmapCamera cc;
        cc.camera_id = id;
        cc.model = "PINHOLE";
        cc.width = cam.width;
        cc.height = cam.height;
        cc.params = {cam.K(0, 0), cam.K(1, 1), cam.K(0, 2), cam.K(1, 2)};
        model.cameras.emplace(id, std::move(cc));

        const Eigen::Quaterniond q(cam.R);
        ColmapImage img;
        img.image_id = id;
        img.quat = {q.w(), q.x(), q.y(), q.z()};
        if (img.quat[0] < 0.0) img.quat = -img.quat;  // canonical sign for determinism
        img.t = cam.t;
        img.camera_id = id;
        img.name = cam.id;
        img.points2d.reserve(tracks.views[ci].observations.size());
        for (const auto& [pid, pixel] : tracks.views[ci].observations) {
            ColmapObservation obs;
            obs.xy = pixel;
            obs.point3d_id = pid;
            img.points2d.push_back(obs);
        }
        model.images.emplace(id, std::move(img));
    }

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        ColmapPoint pt;
        pt.point3d_id = tracks.point_ids[i];
        pt.xyz = cloud.positions[i];
        if (cloud.has_colors()) {
            for (int a = 0; a < 3; ++a) pt.rgb[a] = quantize_color(cloud.colors[i][a]);
        }
        pt.error = 0.0;
        model.points3d.emplace(pt.point3d_id, std::move(pt));
    }
    for (std::size_t ci = 0; ci < tracks.views.size(); ++ci) {
        const auto& obs = tracks.views[ci].observations;
        for (std::size_t oi = 0; oi < obs.size(); ++oi) {
            ColmapTrackEntry te;
            te.image_id = static_cast<int>(ci) + 1;
            te.point2d_idx = static_cast<int>(oi);
            model.points3d.at(obs[oi].first).track.push_back(te);
        }
    }
    model.validate();
    return model;
}

// ---------------------------------------------------------------- PFM

DepthMap load_depth_pfm(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        const std::size_t start = pos;
        while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (start == pos) throw ParseError::at_byte("truncated header", pos);
        return buf.substr(start, pos - start);
    };

    const std::string magic = next_token();
    if (magic == "PF") throw BadHeader("color PFM is not a depth map");
    if (magic != "Pf") throw BadHeader("not a PFM file (magic '" + magic + "')");

    DepthMap dm;
    try {
        dm.width = std::stoi(next_token());
        dm.height = std::stoi(next_token());
    } catch (const std::exception&) {
        throw ParseError::at_byte("bad dimensions", pos);
    }
    if (dm.width < 1 || dm.height < 1 || dm.width > 1000000 || dm.height > 1000000) {
        throw ParseError::at_byte("implausible dimensions", pos);
    }
    double scale;
    try {
        scale = std::stod(next_token());
    } catch (const std::exception&) {
        throw ParseError::at_byte("bad scale", pos);
    }
    if (scale == 0.0) throw ParseError::at_byte("scale must be nonzero", pos);
    if (pos >= buf.size()) throw ParseError::at_byte("missing data", pos);
    ++pos;  // exactly one whitespace byte separates header and data

    const std::size_t n = static_cast<std::size_t>(dm.width) * static_cast<std::size_t>(dm.height);
    if (buf.size() - pos < n * 4) {
        throw ParseError::at_byte("file truncated: need " + std::to_string(n * 4) +
                                      " data bytes, have " + std::to_string(buf.size() - pos),
                                  pos);
    }

    const bool little = scale < 0.0;
    dm.data.resize(n);
    for (int y = 0; y < dm.height; ++y) {
        // PFM rows are stored bottom-up
        const int src_row = dm.height - 1 - y;
        for (int x = 0; x < dm.width; ++x) {
            char b[4];
            std::memcpy(b, buf.data() + pos + (static_cast<std::size_t>(src_row) * dm.width + x) * 4, 4);
            if (!little) {
                std::swap(b[0], b[3]);
                std::swap(b[1], b[2]);
            }
            float v;
            std::memcpy(&v, b, 4);
            dm.data[static_cast<std::size_t>(y) * dm.width + x] = v;
        }
    }
    return dm;
}

void save_depth_pfm(const DepthMap& depth, const std::string& path) {
    if (depth.width < 1 || depth.height < 1 ||
        depth.data.size() != static_cast<std::size_t>(depth.width) * depth.height) {
        throw InvalidArgument("save_depth_pfm: bad depth map shape");
    }
    std::string out = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) +
                      "\n-1.0\n";
    out.reserve(out.size() + depth.data.size() * 4);
    for (int y = depth.height - 1; y >= 0; --y) {
        const char* row = reinterpret_cast<const char*>(depth.data.data() +
                                                        static_cast<std::size_t>(y) * depth.width);
        out.append(row, static_cast<std::size_t>(depth.width) * 4);
    }
    write_file(path, out);
}

// ---------------------------------------------------------------- PNG / PPM

Image load_image_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open '" + path + "' for reading");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    int width = 0, height = 0, channels = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("png decode failed for '" + path + "'");
    }

    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("png with unsupported channel count " + std::to_string(channels));
    }

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    pixels.resize(rowbytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    Image img = Image::create(width, height, channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(x, y, c) =
                    pixels[rowbytes * y + static_cast<std::size_t>(x) * channels + c] / 255.0;
            }
        }
    }
    return img;
}

void save_image_png(const Image& img, const std::string& path) {
    img.validate();
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot open '" + path + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("libpng initialization failed");
    }

    std::vector<unsigned char> pixels(static_cast<std::size_t>(img.width) * img.height *
                                      img.channels);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = static_cast<unsigned char>(
            std::lround(std::clamp(img.data[i], 0.0, 1.0) * 255.0));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    }

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png encode failed for '" + path + "'");
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(fp) != 0) throw IoError("close failure on '" + path + "'");
}

Image load_image_ppm(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t pos = 0;
    auto next_token = [&]() {
        for (;;) {
            while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
            if (pos < buf.size() && buf[pos] == '#') {
                while (pos < buf.size() && buf[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
        if (start == pos) throw ParseError::at_byte("truncated header", pos);
        return buf.substr(start, pos - start);
    };

    if (next_token() != "P6") throw BadHeader("not a binary PPM (P6)");
    int width, height, maxval;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw ParseError::at_byte("bad header numbers", pos);
    }
    if (width < 1 || height < 1 || width > 1000000 || height > 1000000) {
        throw ParseError::at_byte("implausible dimensions", pos);
    }
    if (maxval != 255) throw ParseError::at_byte("only maxval 255 is supported", pos);
    if (pos >= buf.size()) throw ParseError::at_byte("missing data", pos);
    ++pos;  // single whitespace after maxval

    const std::size_t n = static_cast<std::size_t>(width) * height * 3;
    if (buf.size() - pos < n) {
        throw ParseError::at_byte("file truncated", pos);
    }

    Image img = Image::create(width, height, 3);
    for (std::size_t i = 0; i < n; ++i) {
        img.data[i] = static_cast<unsigned char>(buf[pos + i]) / 255.0;
    }
    return img;
}

void save_image_ppm(const Image& img, const std::string& path) {
    img.validate();
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    out.reserve(out.size() + n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = img.channels == 3 ? img.data[i * 3 + c] : img.data[i];
            out.push_back(static_cast<char>(
                std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
        }
    }
    write_file(path, out);
}

namespace {

std::string lower_ext(const std::string& path) {
    std::string ext = fs::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

}  // namespace

Image load_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return load_image_png(path);
    if (ext == ".ppm") return load_image_ppm(path);
    throw InvalidArgument("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

void save_image(const Image& img, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return save_image_png(img, path);
    if (ext == ".ppm") return save_image_ppm(img, path);
    throw InvalidArgument("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

}  // namespace mvsfuse
