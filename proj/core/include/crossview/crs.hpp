#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "crossview/geometry.hpp"

namespace crossview::geo {

class CrsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Projection from input coordinates to the working metric CRS.
///
/// Supported specs:
///   "local"            input coordinates are already metric; identity
///   "utm:<zone><N|S>"  geographic lon/lat degrees -> UTM meters on WGS84,
///                      e.g. "utm:37S" for Dar es Salaam
class Projection {
public:
    virtual ~Projection() = default;
    virtual Point project(Point lonlat_or_xy) const = 0;
    virtual Point unproject(Point xy) const = 0;
    virtual std::string spec() const = 0;

    static std::unique_ptr<Projection> parse(const std::string& spec);
};

}  // namespace crossview::geo
