#pragma once

// Text interchange formats for downstream tools. Doubles are printed with 17
// significant digits so every file re-reads to the same bits.

#include "neurframe/analysis.hpp"
#include "neurframe/features.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace neurframe {

namespace detail {

inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

}  // namespace detail

// Per-tet frames:
//   FRAMES <count>
//   <tet_index> r00 r01 r02 r10 r11 r12 r20 r21 r22
// Rows of the rotation whose columns are the frame axes. Tets whose frame
// could not be recovered carry an all-zero matrix.
inline void write_frames(const DiscreteField& f, std::ostream& out) {
  const std::set<int> failed(f.failures.begin(), f.failures.end());
  out << "FRAMES " << f.frames.size() << "\n";
  for (std::size_t t = 0; t < f.frames.size(); ++t) {
    out << t;
    const bool zero = failed.count(static_cast<int>(t)) > 0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << ' ' << detail::fmt17(zero ? 0.0 : f.frames[t].axes(r, c));
    out << "\n";
  }
}

inline DiscreteField read_frames(std::istream& in, const std::string& source = "<stream>") {
  std::string tag;
  long count = -1;
  if (!(in >> tag >> count) || tag != "FRAMES" || count < 0) throw ParseError(source, 1, "expected 'FRAMES <count>'");
  DiscreteField f;
  f.frames.resize(count);
  for (long i = 0; i < count; ++i) {
    long index;
    Mat3 m;
    if (!(in >> index)) throw ParseError(source, i + 2, "missing frame record");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (!(in >> m(r, c))) throw ParseError(source, i + 2, "expected 9 matrix entries");
    if (index != i) throw ParseError(source, i + 2, "tet index out of order");
    if (m.isZero(0)) {
      f.failures.push_back(static_cast<int>(i));
      m.setIdentity();
    } else if (!is_rotation(m, 1e-6)) {
      throw ParseError(source, i + 2, "not a rotation matrix");
    }
    f.frames[i].axes = m;
  }
  return f;
}

inline void save_frames(const DiscreteField& f, const std::string& path) {
  auto out = detail::open_out(path);
  write_frames(f, out);
}

inline DiscreteField load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_frames(in, path);
}

// Singular points: ASCII PLY with the loop rotation's group index (0..23) as
// `rotation_class` and the subdivision depth.
inline void write_singular_ply(const std::vector<SingularPoint>& pts, std::ostream& out) {
  out << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nproperty int rotation_class\n"
         "property int depth\nend_header\n";
  for (const auto& p : pts)
    out << detail::fmt17(p.position.x()) << ' ' << detail::fmt17(p.position.y()) << ' '
        << detail::fmt17(p.position.z()) << ' ' << p.rotation.index() << ' ' << p.depth << "\n";
}

inline std::vector<SingularPoint> read_singular_ply(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t no = 0, count = 0;
  std::vector<std::string> props;
  bool header = true;
  while (header && std::getline(in, line)) {
    ++no;
    std::istringstream ls(line);
    std::string w;
    ls >> w;
    if (no == 1 && w != "ply") throw ParseError(source, no, "not a PLY file");
    if (w == "element") {
      std::string name;
      ls >> name >> count;
    } else if (w == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (w == "end_header") {
      header = false;
    }
  }
  const auto col = [&](const std::string& name) {
    const auto it = std::find(props.begin(), props.end(), name);
    if (it == props.end()) throw ParseError(source, no, "missing property " + name);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t cx = col("x"), cy = col("y"), cz = col("z"), cr = col("rotation_class");
  std::vector<SingularPoint> out;
  for (std::size_t i = 0; i < count; ++i) {
    ++no;
    if (!std::getline(in, line)) throw ParseError(source, no, "truncated vertex list");
    std::istringstream ls(line);
    std::vector<double> v(props.size());
    for (double& x : v)
      if (!(ls >> x)) throw ParseError(source, no, "bad vertex record");
    out.push_back({Vec3(v[cx], v[cy], v[cz]), OctaRotation(static_cast<int>(v[cr])), 0});
    if (std::find(props.begin(), props.end(), "depth") != props.end()) out.back().depth = static_cast<int>(v[col("depth")]);
  }
  return out;
}

// Polylines as OBJ `v` / `l` records (1-based indices).
inline void write_obj_polylines(const std::vector<std::vector<Vec3>>& lines, std::ostream& out) {
  std::size_t base = 1;
  for (const auto& l : lines)
    for (const Vec3& p : l) out << "v " << detail::fmt17(p.x()) << ' ' << detail::fmt17(p.y()) << ' ' << detail::fmt17(p.z()) << "\n";
  for (const auto& l : lines) {
    if (l.size() >= 2) {
      out << "l";
      for (std::size_t i = 0; i < l.size(); ++i) out << ' ' << base + i;
      out << "\n";
    }
    base += l.size();
  }
}

inline std::vector<std::vector<Vec3>> streamline_polylines(const std::vector<Streamline>& s) {
  std::vector<std::vector<Vec3>> out;
  for (const auto& l : s) out.push_back(l.points);
  return out;
}

inline std::vector<std::vector<Vec3>> feature_polylines(const FeatureSet& fs) {
  std::vector<std::vector<Vec3>> out;
  for (const auto& s : fs.segments) out.push_back({s.a, s.b});
  return out;
}

// Cross field: one line per surface triangle, `tri_index ux uy uz vx vy vz`.
inline void write_cross_field(const std::vector<Cross>& crosses, std::ostream& out) {
  for (std::size_t t = 0; t < crosses.size(); ++t) {
    out << t;
    for (const Vec3* w : {&crosses[t].u, &crosses[t].v})
      for (int a = 0; a < 3; ++a) out << ' ' << detail::fmt17((*w)[a]);
    out << "\n";
  }
}

inline std::vector<Cross> read_cross_field(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Cross> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    long index;
    Cross c;
    if (!(ls >> index >> c.u.x() >> c.u.y() >> c.u.z() >> c.v.x() >> c.v.y() >> c.v.z()))
      throw ParseError(source, no, "expected 'tri_index ux uy uz vx vy vz'");
    if (index != static_cast<long>(out.size())) throw ParseError(source, no, "triangle index out of order");
    out.push_back(c);
  }
  return out;
}

}  // namespace neurframe
