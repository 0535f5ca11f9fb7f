from application.registration.use_cases.register_clouds import register_clouds

__all__ = ["register_clouds"]
