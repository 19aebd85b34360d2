// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <memory>
#include <string>

#include "raw2raw/toolsrv/annotation_service.hpp"

namespace raw2raw::tools {

/// JSON-over-HTTP front end of an AnnotationService.
///
///   GET    /pairs
///   GET    /pairs/{id}
///   GET    /images/{id}/preview
///   POST   /pairs/{id}/chart
///   POST   /pairs/{id}/regions
///   DELETE /pairs/{id}/regions/{idx}
///   POST   /pairs/{id}/commit
///   GET    /pairs/{id}/fit
class AnnotationServer
{
public:
    explicit AnnotationServer(AnnotationService &service);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer &) = delete;
    AnnotationServer &operator=(const AnnotationServer &) = delete;

    /// Binds to `port` (0 picks a free one); returns the bound port or -1.
    int bind(const std::string &host, int port);
    /// Serves until stop(); call after bind().
    bool serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace raw2raw::tools
