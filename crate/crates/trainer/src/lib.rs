//! Trainer service: learners, courses and the attempt feedback loop, with an
//! HTTP front end.

pub mod config;
pub mod course;
pub mod http;
pub mod model;
pub mod service;
pub mod store;

pub use config::ServiceConfig;
pub use course::{CourseKind, CourseScript};
pub use http::{router, serve};
pub use model::{FeedbackBundle, Learner, LearnerState, Report};
pub use service::{CustomCourseRequest, ErrorCode, ServiceError, Stage, TrainerService};
