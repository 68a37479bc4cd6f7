#pragma once

#include <string>

namespace httplib {
class Server;
}

namespace lexdrift {

class StudyService;

struct StudyApiOptions {
  std::string adminToken;  // empty disables the export route
  std::string staticDir;   // optional front-end bundle mounted at /
};

/// Registers the study routes on `server`; `service` must outlive it.
void mountStudyApi(httplib::Server& server, StudyService& service, const StudyApiOptions& options);

}  // namespace lexdrift
