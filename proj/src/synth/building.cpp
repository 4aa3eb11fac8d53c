// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#include "dragon/synth/building.hpp"

#include "dragon/core/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace dragon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Span {
    double tn = -kInf, tf = kInf;
    Vec3 normal = Vec3::Zero();
    [[nodiscard]] bool empty() const { return !(tn <= tf); }
};

// Clip to the half-space n.x <= d.
void clip_plane(Span& s, const Vec3& n, double d, const Vec3& o, const Vec3& dir) {
    const double denom = n.dot(dir);
    const double num = d - n.dot(o);
    if (denom == 0.0) {
        if (num < 0.0) s.tn = kInf;
        return;
    }
    const double t = num / denom;
    if (denom < 0.0) {
        if (t > s.tn) {
            s.tn = t;
            s.normal = n;
        }
    } else {
        s.tf = std::min(s.tf, t);
    }
}

// Roots of |(o + t d) - c|^2 = r^2 restricted to the given axes mask.
bool quadric_roots(const Vec3& o, const Vec3& dir, const Vec3& c, double r, const Vec3& mask, double& t0,
                   double& t1) {
    const Vec3 oc = (o - c).cwiseProduct(mask);
    const Vec3 dd = dir.cwiseProduct(mask);
    const double a = dd.squaredNorm();
    if (a == 0.0) {
        if (oc.squaredNorm() <= r * r) {
            t0 = -kInf;
            t1 = kInf;
            return true;
        }
        return false;
    }
    const double b = oc.dot(dd);
    const double disc = b * b - a * (oc.squaredNorm() - r * r);
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    t0 = (-b - sq) / a;
    t1 = (-b + sq) / a;
    return true;
}

void clip_quadric(Span& s, const Vec3& o, const Vec3& dir, const Vec3& c, double r, const Vec3& mask) {
    double t0, t1;
    if (!quadric_roots(o, dir, c, r, mask, t0, t1)) {
        s.tn = kInf;
        return;
    }
    if (t0 > s.tn) {
        s.tn = t0;
        s.normal = ((o + t0 * dir - c).cwiseProduct(mask)) / r;
    }
    s.tf = std::min(s.tf, t1);
}

Span solid_span(const Primitive& p, const Vec3& o, const Vec3& dir) {
    Span s;
    switch (p.shape) {
    case Primitive::Shape::Box:
        clip_plane(s, Vec3::UnitX(), p.max.x(), o, dir);
        clip_plane(s, -Vec3::UnitX(), -p.min.x(), o, dir);
        clip_plane(s, Vec3::UnitY(), p.max.y(), o, dir);
        clip_plane(s, -Vec3::UnitY(), -p.min.y(), o, dir);
        clip_plane(s, Vec3::UnitZ(), p.max.z(), o, dir);
        clip_plane(s, -Vec3::UnitZ(), -p.min.z(), o, dir);
        break;
    case Primitive::Shape::Pyramid: {
        const Vec3 apex(0.5 * (p.min.x() + p.max.x()), p.max.y(), 0.5 * (p.min.z() + p.max.z()));
        clip_plane(s, -Vec3::UnitY(), -p.min.y(), o, dir);
        const Vec3 corners[4] = {Vec3(p.min.x(), p.min.y(), p.min.z()), Vec3(p.max.x(), p.min.y(), p.min.z()),
                                 Vec3(p.max.x(), p.min.y(), p.max.z()), Vec3(p.min.x(), p.min.y(), p.max.z())};
        const Vec3 mid = 0.25 * (corners[0] + corners[1] + corners[2] + corners[3]);
        for (int k = 0; k < 4; ++k) {
            Vec3 n = (corners[(k + 1) % 4] - corners[k]).cross(apex - corners[k]).normalized();
            if (n.dot(mid - corners[k]) > 0.0) n = -n;
            clip_plane(s, n, n.dot(corners[k]), o, dir);
        }
        break;
    }
    case Primitive::Shape::Cylinder:
        clip_plane(s, -Vec3::UnitY(), -p.center.y(), o, dir);
        clip_plane(s, Vec3::UnitY(), p.center.y() + p.height, o, dir);
        clip_quadric(s, o, dir, p.center, p.radius, Vec3(1, 0, 1));
        break;
    case Primitive::Shape::Dome:
        clip_plane(s, -Vec3::UnitY(), -p.center.y(), o, dir);
        clip_quadric(s, o, dir, p.center, p.radius, Vec3(1, 1, 1));
        break;
    }
    return s;
}

double surface_u(const Primitive& p, const Vec3& x, const Vec3& n) {
    switch (p.shape) {
    case Primitive::Shape::Cylinder:
    case Primitive::Shape::Dome:
        if (std::abs(n.y()) < 0.99)
            return std::atan2(x.z() - p.center.z(), x.x() - p.center.x()) * p.radius;
        return x.x();
    default:
        return std::abs(n.x()) > std::abs(n.z()) ? x.z() : x.x();
    }
}

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double hash01(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t seed) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ static_cast<std::uint64_t>(x));
    h = mix64(h ^ static_cast<std::uint64_t>(y));
    h = mix64(h ^ static_cast<std::uint64_t>(z));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(const Vec3& p, std::uint64_t seed) {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
               iz = static_cast<std::int64_t>(fz);
    const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
    double v = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
                v += w * hash01(ix + dx, iy + dy, iz + dz, seed);
            }
    return v;
}

// Fraction of a pattern of the given frequency that survives a footprint.
double band_limit(double frequency, double footprint) {
    return std::clamp(2.0 - 4.0 * frequency * footprint, 0.0, 1.0);
}

// Zero-mean fractal noise in roughly [-0.5, 0.5].
double fbm(const Vec3& p, double frequency, int octaves, double footprint, std::uint64_t seed) {
    double sum = 0.0, norm = 0.0, amp = 1.0, f = frequency;
    for (int k = 0; k < octaves; ++k) {
        sum += amp * band_limit(f, footprint) * (value_noise(p * f, seed + 977 * k) - 0.5);
        norm += amp;
        amp *= 0.5;
        f *= 2.0;
    }
    return sum / norm;
}

} // namespace

Vec3 shade_material(const Material& m, const Vec3& x, double u, const Vec3& n, double footprint) {
    (void)n;
    switch (m.kind) {
    case TextureKind::Flat:
        return m.base;
    case TextureKind::Noise: {
        const double v = std::clamp(0.5 + 2.0 * m.contrast * fbm(x, m.frequency, m.octaves, footprint, m.seed),
                                    0.0, 1.0);
        return m.base + (m.accent - m.base) * v;
    }
    case TextureKind::Stripes: {
        const double band = std::floor(x.y() * m.frequency);
        const double h = hash01(static_cast<std::int64_t>(band), 0, 0, m.seed);
        const double keep = band_limit(m.frequency, footprint);
        const double v = 0.5 + keep * (h - 0.5) * m.contrast;
        return m.base + (m.accent - m.base) * v;
    }
    case TextureKind::Windows: {
        const double cu = u * m.frequency, cv = x.y() * m.frequency;
        const double iu = std::floor(cu), iv = std::floor(cv);
        const double fu = cu - iu, fv = cv - iv;
        const auto ku = static_cast<std::int64_t>(iu), kv = static_cast<std::int64_t>(iv);
        const double shade = hash01(ku, kv, 7, m.seed);
        // Irregular openings: roughly a quarter of the cells are walled up,
        // the rest get a per-cell tint between the accent and a pale glaze.
        const bool window = shade > 0.25 && fu > 0.25 && fu < 0.75 && fv > 0.2 && fv < 0.7;
        const Vec3 wall =
            m.base * (1.0 + 2.0 * m.contrast * fbm(x, 0.8 * m.frequency, m.octaves, footprint, m.seed + 1) +
                      2.0 * m.contrast * fbm(x, 4.0 * m.frequency, m.octaves, footprint, m.seed + 2));
        const Vec3 tint(hash01(ku, kv, 8, m.seed), hash01(ku, kv, 9, m.seed), hash01(ku, kv, 10, m.seed));
        const double glaze = (shade - 0.25) / 0.75;
        const Vec3 glass = m.accent + glaze * (0.4 * Vec3::Ones() + 0.5 * tint - m.accent);
        const Vec3 sharp = window ? glass : wall;
        const Vec3 mean = 0.1875 * (m.accent + 0.5 * (0.65 * Vec3::Ones() - m.accent)) + 0.8125 * m.base;
        const double keep = band_limit(2.0 * m.frequency, footprint);
        return mean + keep * (sharp - mean);
    }
    }
    return m.base;
}

void BuildingSpec::validate() const {
    if (primitives.empty()) throw InvalidInput("building '" + name + "' has no primitives");
    for (const auto& p : primitives) {
        double reach = 0.0;
        switch (p.shape) {
        case Primitive::Shape::Box:
        case Primitive::Shape::Pyramid:
            if (!(p.max.array() > p.min.array()).all())
                throw InvalidInput("building '" + name + "': box with empty extent");
            for (double x : {p.min.x(), p.max.x()})
                for (double z : {p.min.z(), p.max.z()}) reach = std::max(reach, std::hypot(x, z));
            break;
        case Primitive::Shape::Cylinder:
        case Primitive::Shape::Dome:
            if (!(p.radius > 0.0) || (p.shape == Primitive::Shape::Cylinder && !(p.height > 0.0)))
                throw InvalidInput("building '" + name + "': non-positive radius or height");
            reach = std::hypot(p.center.x(), p.center.z()) + p.radius;
            break;
        }
        if (reach > bounding_radius + 1e-9)
            throw InvalidInput("building '" + name + "': primitive outside the bounding radius");
    }
}

std::optional<RayHit> intersect(const BuildingSpec& spec, const Vec3& o, const Vec3& dir, double t_min) {
    RayHit best;
    best.t = kInf;
    for (const auto& p : spec.primitives) {
        Span s = solid_span(p, o, dir);
        if (s.empty() || s.tf < t_min) continue;
        double t = s.tn;
        Vec3 n = s.normal;
        bool on_cut = false;
        if (p.has_cut) {
            const Vec3 mask = p.cut_along_x ? Vec3(0, 1, 1) : Vec3(1, 1, 0);
            double c0, c1;
            if (quadric_roots(o, dir, p.cut_center, p.cut_radius, mask, c0, c1) && t > c0 && t < c1) {
                // Entry lies inside the hole: the ray re-enters solid where it leaves the hole.
                if (c1 >= s.tf) continue;
                t = c1;
                n = -((o + c1 * dir - p.cut_center).cwiseProduct(mask)) / p.cut_radius;
                on_cut = true;
            }
        }
        if (t < t_min || t >= best.t) continue;
        best.t = t;
        best.point = o + t * dir;
        best.normal = n;
        best.material = (!on_cut && n.y() > 0.7) ? &p.top : &p.side;
        best.u = on_cut ? (p.cut_along_x ? best.point.x() : best.point.z()) : surface_u(p, best.point, n);
    }
    if (dir.y() < 0.0) {
        const double t = -o.y() / dir.y();
        if (t >= t_min && t < best.t) {
            best.t = t;
            best.point = o + t * dir;
            best.point.y() = 0.0;
            best.normal = Vec3::UnitY();
            best.material = &spec.ground;
            best.u = best.point.x();
        }
    }
    if (best.t == kInf) return std::nullopt;
    return best;
}

namespace {

Material mat(TextureKind kind, Vec3 base, Vec3 accent, double freq, double contrast, std::uint64_t seed,
             int octaves = 3) {
    Material m;
    m.kind = kind;
    m.base = base;
    m.accent = accent;
    m.frequency = freq;
    m.contrast = contrast;
    m.seed = seed;
    m.octaves = octaves;
    return m;
}

Primitive box(Vec3 lo, Vec3 hi, Material side, Material top) {
    Primitive p;
    p.shape = Primitive::Shape::Box;
    p.min = lo;
    p.max = hi;
    p.side = side;
    p.top = top;
    return p;
}

Primitive cylinder(Vec3 base, double r, double h, Material side, Material top) {
    Primitive p;
    p.shape = Primitive::Shape::Cylinder;
    p.center = base;
    p.radius = r;
    p.height = h;
    p.side = side;
    p.top = top;
    return p;
}

BuildingSpec gap_building() {
    // Drum with windowed facade, a plain roof, and eight low annexes on a
    // band-limited plaza. Adjacent orbits share features; ground and drone
    // views share almost none, which is the gap the pipeline must bridge.
    BuildingSpec b;
    b.name = "gap";
    b.bounding_radius = 2.2;
    const Material facade =
        mat(TextureKind::Windows, Vec3(0.78, 0.66, 0.5), Vec3(0.25, 0.2, 0.18), 2.0, 0.8, 11, 1);
    const Material roof = mat(TextureKind::Flat, Vec3(0.62, 0.6, 0.58), Vec3::Zero(), 1.0, 0.0, 12);
    b.primitives.push_back(cylinder(Vec3::Zero(), 1.0, 1.5, facade, roof));
    const Material annex =
        mat(TextureKind::Noise, Vec3(0.55, 0.45, 0.4), Vec3(0.9, 0.85, 0.75), 4.0, 1.0, 13, 2);
    const Material annex_roof =
        mat(TextureKind::Noise, Vec3(0.35, 0.2, 0.18), Vec3(0.8, 0.55, 0.4), 6.0, 1.0, 14, 2);
    for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * std::numbers::pi * (k + 0.5) / 8.0;
        const Vec3 c(1.6 * std::cos(a), 0.0, 1.6 * std::sin(a));
        b.primitives.push_back(box(c - Vec3(0.22, 0.0, 0.22), c + Vec3(0.22, 0.28, 0.22), annex, annex_roof));
    }
    b.ground = mat(TextureKind::Noise, Vec3(0.4, 0.42, 0.36), Vec3(0.8, 0.78, 0.7), 2.5, 1.0, 15, 2);
    return b;
}

BuildingSpec tower_building() {
    BuildingSpec b;
    b.name = "tower";
    b.bounding_radius = 1.2;
    const Material facade =
        mat(TextureKind::Windows, Vec3(0.7, 0.72, 0.78), Vec3(0.15, 0.2, 0.3), 7.0, 0.7, 21);
    const Material roof = mat(TextureKind::Noise, Vec3(0.4, 0.4, 0.42), Vec3(0.7, 0.7, 0.7), 6.0, 0.8, 22);
    b.primitives.push_back(box(Vec3(-0.5, 0.0, -0.5), Vec3(0.5, 1.6, 0.5), facade, roof));
    Primitive spire;
    spire.shape = Primitive::Shape::Pyramid;
    spire.min = Vec3(-0.4, 1.6, -0.4);
    spire.max = Vec3(0.4, 2.3, 0.4);
    spire.side = mat(TextureKind::Stripes, Vec3(0.5, 0.5, 0.55), Vec3(0.85, 0.8, 0.6), 12.0, 1.0, 23);
    spire.top = spire.side;
    b.primitives.push_back(spire);
    b.ground = mat(TextureKind::Noise, Vec3(0.4, 0.5, 0.35), Vec3(0.6, 0.7, 0.5), 8.0, 1.0, 24);
    return b;
}

BuildingSpec arch_building() {
    BuildingSpec b;
    b.name = "arch";
    b.bounding_radius = 1.3;
    Primitive p = box(Vec3(-0.9, 0.0, -0.35), Vec3(0.9, 1.4, 0.35),
                      mat(TextureKind::Noise, Vec3(0.85, 0.8, 0.7), Vec3(0.45, 0.4, 0.35), 7.0, 1.0, 31),
                      mat(TextureKind::Noise, Vec3(0.7, 0.68, 0.6), Vec3(0.5, 0.45, 0.4), 5.0, 0.8, 32));
    p.has_cut = true;
    p.cut_along_x = false;
    p.cut_center = Vec3(0.0, 0.55, 0.0);
    p.cut_radius = 0.4;
    b.primitives.push_back(p);
    b.ground = mat(TextureKind::Noise, Vec3(0.5, 0.5, 0.48), Vec3(0.7, 0.68, 0.64), 6.0, 1.0, 33);
    return b;
}

BuildingSpec dome_building() {
    BuildingSpec b;
    b.name = "dome";
    b.bounding_radius = 1.3;
    const Material drum = mat(TextureKind::Windows, Vec3(0.9, 0.88, 0.8), Vec3(0.3, 0.25, 0.2), 6.0, 0.8, 41);
    b.primitives.push_back(cylinder(Vec3::Zero(), 1.0, 0.6, drum, drum));
    Primitive dome;
    dome.shape = Primitive::Shape::Dome;
    dome.center = Vec3(0.0, 0.6, 0.0);
    dome.radius = 0.9;
    dome.side = mat(TextureKind::Noise, Vec3(0.35, 0.55, 0.45), Vec3(0.7, 0.8, 0.7), 8.0, 1.0, 42);
    dome.top = dome.side;
    b.primitives.push_back(dome);
    b.ground = mat(TextureKind::Noise, Vec3(0.55, 0.5, 0.45), Vec3(0.75, 0.7, 0.6), 6.0, 1.0, 43);
    return b;
}

} // namespace

std::vector<std::string> building_names() { return {"gap", "tower", "arch", "dome"}; }

BuildingSpec make_building(const std::string& name, std::uint64_t seed) {
    BuildingSpec b;
    if (name == "gap") b = gap_building();
    else if (name == "tower") b = tower_building();
    else if (name == "arch") b = arch_building();
    else if (name == "dome") b = dome_building();
    else throw InvalidInput("unknown building '" + name + "'");
    b.sun_direction.normalize();
    const std::uint64_t shift = seed * 0x9e3779b97f4a7c15ULL;
    for (auto& p : b.primitives) {
        p.side.seed += shift;
        p.top.seed += shift;
    }
    b.ground.seed += shift;
    b.validate();
    return b;
}

} // namespace dragon
