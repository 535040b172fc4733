import os
import sys
# Allow `python src/main.py` from the repository root
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from flask import Flask, jsonify
from flask_cors import CORS
import logging

from src.routes.estimation import estimation_bp
from src.utils.config import configure_app, get_log_settings
from src.utils.monitoring import configure_logging

logger = logging.getLogger(__name__)


def create_app():
    app = Flask(__name__)
    configure_app(app)

    # Enable CORS for all routes
    CORS(app, origins="*")

    app.register_blueprint(estimation_bp, url_prefix='/api')

    @app.errorhandler(404)
    def not_found_handler(e):
        return jsonify({'success': False, 'error': 'Not found'}), 404

    @app.errorhandler(500)
    def internal_error_handler(e):
        """Handle internal server errors"""
        logger.error(f"Internal server error: {e}")
        return jsonify({
            'success': False,
            'error': 'Internal server error',
            'message': 'An unexpected error occurred.'
        }), 500

    return app


if __name__ == '__main__':
    settings = get_log_settings()
    configure_logging(settings['level'], settings['log_file'])
    port = int(os.environ.get('PORT', 5000))
    create_app().run(host='0.0.0.0', port=port, debug=False)
